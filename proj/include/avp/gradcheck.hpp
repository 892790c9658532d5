#pragma once

#include <string>
#include <vector>

#include "avp/features.hpp"
#include "avp/fit.hpp"
#include "avp/raymarch.hpp"

namespace avp {

// Finite-difference verification of the adjoints on seeded micro scenes.
// Central differences at f64; the per-class worst relative error uses
// max(|a|, |fd|, floor) as the denominator, with the floor tied to the
// class-wide gradient magnitude so true-zero gradients compare absolutely.

struct GradCheckClass {
    std::string name;
    double worst_rel = 0.0;
    int checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckClass> classes;
    double runtime_seconds = 0.0;

    double worst() const {
        double w = 0;
        for (const auto& c : classes) w = std::max(w, c.worst_rel);
        return w;
    }
    bool pass(double tol) const { return worst() <= tol; }
};

// Random oriented boxes with smooth low-frequency payloads, built for
// finite-difference friendliness (large voxels relative to the step).
PrimitiveSet random_primitive_set(Rng& rng, int count, int payload_res, double alpha_scale);

// Small look-at camera used by the micro scenes.
Camera micro_camera(Rng& rng, const Vec3& target, double distance, int res);

// render_backward vs finite differences over {position, rotation, scale,
// payload rgb, payload alpha} on `scene_count` seeded scenes.
GradCheckReport gradcheck_render(int scene_count, uint64_t seed, double fd_step = 1e-5);

// Full composite-loss-through-decoder gradient vs finite differences over the
// decoder parameter groups.
GradCheckReport gradcheck_full(int scene_count, uint64_t seed, double fd_step = 1e-5);

}  // namespace avp
