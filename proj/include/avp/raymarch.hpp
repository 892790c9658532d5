#pragma once

#include <vector>

#include "avp/camera.hpp"
#include "avp/primitives.hpp"

namespace avp {

struct RenderConfig {
    double step_size = 0.01;  // marching step in world units
    Vec3 background{0, 0, 0};
    int max_steps = 1 << 20;  // per-ray sample cap
    int threads = 0;          // 0 = hardware concurrency

    void validate() const {
        if (step_size <= 0) throw Error(ErrorKind::Usage, "step_size must be positive");
        if (max_steps <= 0) throw Error(ErrorKind::Usage, "max_steps must be positive");
    }
};

struct RenderOutput {
    int width = 0, height = 0;
    std::vector<double> rgb;    // H*W*3, row-major
    std::vector<double> alpha;  // H*W
};

// One ray/box overlap. Boundaries are world-space ray parameters from the
// local slab test, clipped to the ray range; axis = -1 marks a boundary
// clipped by the ray range rather than a box face.
struct HitInterval {
    int prim = -1;
    double t_enter = 0, t_exit = 0;
    int enter_axis = -1, exit_axis = -1;
    double enter_face = 0, exit_face = 0;  // local face coordinate, -1 or +1
};

// Uniform world-space grid over primitive AABBs.
struct AccelGrid {
    Aabb bounds;
    int nx = 1, ny = 1, nz = 1;
    Vec3 cell_size{1, 1, 1};
    std::vector<int> cell_start;  // CSR offsets, nx*ny*nz + 1
    std::vector<int> items;
};

AccelGrid build_accel(const PrimitiveSet& set);

// Union of primitive bounding spheres, padded by 1% of the diagonal.
Aabb scene_bounds(const PrimitiveSet& set);

// All primitives whose oriented box intersects the ray within its range,
// sorted by (t_enter, index). Pass accel = nullptr for brute force; the two
// paths return identical results.
std::vector<HitInterval> intersect_primitives(const Ray& ray, const PrimitiveSet& set,
                                              const AccelGrid* accel = nullptr);

struct MarchResult {
    Vec3 rgb{0, 0, 0};
    double alpha = 0;
};

// Fixed-step midpoint discretization of the saturating accumulation scheme
// over the union of hit intervals:
//   T_i = min(1, T_{i-1} + alpha(x_i) dt),  rgb = sum (T_i - T_{i-1}) c(x_i)
// plus (1 - T) * background. Aggregate fields sum over covering primitives.
MarchResult march(const Ray& ray, const PrimitiveSet& set, const RenderConfig& config);

RenderOutput render(const PrimitiveSet& set, const Camera& camera, const RenderConfig& config);

// Gradients w.r.t. every primitive parameter. d_rotation is left-trivialized:
// dL/dw for the perturbation R_k <- exp(w^) R_k at w = 0.
struct SceneGrads {
    std::vector<Vec3> d_position;
    std::vector<Vec3> d_rotation;
    std::vector<Vec3> d_scale;
    std::vector<double> d_rgb;    // K*3*S^3
    std::vector<double> d_alpha;  // K*S^3

    void init(const PrimitiveSet& set);
    void add(const SceneGrads& other);
};

// Exact adjoint of the discrete forward march, including the dependence of
// sample positions and step sizes on the hit boundaries. grad_alpha may be
// empty (treated as zero).
SceneGrads render_backward(const PrimitiveSet& set, const Camera& camera,
                           const RenderConfig& config, const std::vector<double>& grad_rgb,
                           const std::vector<double>& grad_alpha = {});

// Single-ray adjoint, accumulating into grads.
void march_backward(const Ray& ray, const PrimitiveSet& set, const RenderConfig& config,
                    const Vec3& grad_rgb, double grad_alpha, SceneGrads& grads);

}  // namespace avp
