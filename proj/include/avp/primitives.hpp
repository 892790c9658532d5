#pragma once

#include <vector>

#include "avp/math.hpp"
#include "avp/mesh.hpp"
#include "avp/uv_atlas.hpp"

namespace avp {

inline constexpr double kScaleFloor = 1e-4;

// Voxel payloads of one primitive: rgb in [0,1], alpha is opacity density per
// unit length (>= 0). Layout is [channel][z][y][x], x fastest.
struct PrimitivePayload {
    int resolution = 0;  // S
    std::vector<double> rgb;    // 3 * S^3
    std::vector<double> alpha;  // S^3

    explicit PrimitivePayload(int S = 0)
        : resolution(S),
          rgb(static_cast<size_t>(3) * S * S * S, 0.0),
          alpha(static_cast<size_t>(S) * S * S, 0.0) {}
};

// Articulation-driven transform of one primitive before correctives.
struct PrimitiveBasis {
    Vec3 position;   // surface point of the texel on the posed mesh
    Mat3 orientation;  // triangle tangent frame
    Vec3 scale;      // half-extents per local axis
};

struct Correctives {
    Vec3 delta_position;
    Vec3 delta_rotation;  // axis-angle
    Vec3 delta_scale;
};

// Final primitive mixture with flat payload storage:
//   rgb   [k][c][z][y][x]  (3*S^3 per primitive)
//   alpha [k][z][y][x]     (S^3 per primitive)
struct PrimitiveSet {
    int count = 0;          // K
    int payload_res = 0;    // S
    std::vector<Vec3> position;
    std::vector<Mat3> rotation;
    std::vector<Vec3> scale;
    std::vector<int> texel;     // owning texel of each primitive
    std::vector<double> rgb;
    std::vector<double> alpha;
    int clamped_scale_count = 0;  // diagnostics: scale components at the floor

    size_t voxels() const { return static_cast<size_t>(payload_res) * payload_res * payload_res; }
    double* rgb_of(int k) { return rgb.data() + static_cast<size_t>(k) * 3 * voxels(); }
    const double* rgb_of(int k) const { return rgb.data() + static_cast<size_t>(k) * 3 * voxels(); }
    double* alpha_of(int k) { return alpha.data() + static_cast<size_t>(k) * voxels(); }
    const double* alpha_of(int k) const { return alpha.data() + static_cast<size_t>(k) * voxels(); }
};

struct BasisConfig {
    double thickness_factor = 1.0;  // kappa: normal half-extent over mean tangent half-extent
};

// Per valid texel: position from the posed surface, orientation from the
// triangle tangent frame, scale from the canonical rest shape's UV gradient
// (|dX/du|/(2W), |dX/dv|/(2W), kappa * mean of the two).
std::vector<PrimitiveBasis> init_basis(const TemplateMesh& mesh, const PosedMesh& posed,
                                       const TexelGrid& grid, const BasisConfig& config = {});

// t = dt + t_hat, R = exp(dR) * R_hat, s = max(ds + s_hat, floor).
// Payloads are zero-initialized at the given resolution.
PrimitiveSet apply_correctives(const std::vector<PrimitiveBasis>& basis,
                               const std::vector<Correctives>& correctives,
                               const std::vector<int>& texels, int payload_res);

// Adjoint of apply_correctives for the transform parameters. d_rotation_world
// is the left-trivialized gradient at R_k (dL/dw for R <- exp(w) R at w = 0).
struct CorrectiveGrads {
    Vec3 d_position;
    Vec3 d_rotation;  // w.r.t. the axis-angle corrective
    Vec3 d_scale;
};

CorrectiveGrads apply_correctives_backward(const PrimitiveBasis& basis, const Correctives& corr,
                                           const Vec3& d_position_world,
                                           const Vec3& d_rotation_world,
                                           const Vec3& d_scale_world);

// local = diag(1/s) R^T (p - t); the primitive occupies [-1,1]^3 locally.
inline Vec3 world_to_local(const Vec3& point, const Vec3& position, const Mat3& rotation,
                           const Vec3& scale) {
    Vec3 d = rotation.t_mul(point - position);
    return {d.x / scale.x, d.y / scale.y, d.z / scale.z};
}

inline Vec3 local_to_world(const Vec3& local, const Vec3& position, const Mat3& rotation,
                           const Vec3& scale) {
    return rotation * cwise_mul(local, scale) + position;
}

}  // namespace avp
