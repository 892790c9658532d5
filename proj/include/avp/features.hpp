#pragma once

#include <random>
#include <vector>

#include "avp/primitives.hpp"
#include "avp/uv_atlas.hpp"

namespace avp {

// Deterministic RNG helpers. All randomness in the project flows through
// this wrapper so draws stay implementation-independent.
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(uint64_t seed) : gen(seed) {}

    double uniform() { return (gen() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double gaussian() {
        double u1 = std::max(uniform(), 1e-300);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    uint64_t bounded(uint64_t n) { return rng_bounded(gen(), n); }
};

// Texel-aligned conditioning planes, channel-major, texel index = j*W + i.
struct FeatureMaps {
    int resolution = 0;     // W
    int pose_channels = 0;  // C_theta
    int image_channels = 0; // C_I
    std::vector<double> pose;   // C_theta * W^2
    std::vector<double> image;  // C_I * W^2
    std::vector<double> view;   // W^2
};

// Shared linear projection for pose features, C_out x raw_dim row-major with
// raw_dim = 4J + 3 (per-joint quaternion channels plus root translation).
struct PoseProjection {
    int c_out = 0;
    int raw_dim = 0;
    std::vector<double> weights;

    static PoseProjection random_orthonormal(int c_out, int joint_count, Rng& rng);
    static PoseProjection identity(int joint_count);
};

// Per-texel masked pose encoding followed by the shared projection. Each
// joint's channels are scaled by the texel's interpolated skinning weight for
// that joint; invalid texels are zero.
std::vector<double> pose_features(const Pose& pose, const Skeleton& skeleton,
                                  const TemplateMesh& mesh, const TexelGrid& grid,
                                  const PoseProjection& proj);

// Weighted box-downsample of the multi-view texture to W x W using the unwrap
// weight map. Texture resolution must be a positive multiple of W.
std::vector<double> image_features(const UvImage& texture, int w);

// v_t = v . n_t per triangle (v from triangle centroid to the camera center),
// warped to UV space.
std::vector<double> view_features(const Camera& camera, const PosedMesh& posed,
                                  const TemplateMesh& mesh, const TexelGrid& grid);

// Per-texel affine decoder with shared weights and untied biases. The motion
// branch sees (F_pose, F_image); opacity the same; appearance additionally
// sees the view feature. Parameters live in one flat vector so the optimizer
// can treat them uniformly.
struct DecoderParams {
    int c_pose = 0, c_image = 0;
    int payload_res = 0;  // S
    int resolution = 0;   // W
    int texel_count = 0;  // K
    double motion_scale = 0.0;      // sigma_m
    double rotation_limit = M_PI - 1e-6;
    // Shared weights act as weight_gain * raw parameters. Under Adam's
    // per-parameter step normalization this moves them slower than the
    // untied biases, which carry most of the per-texel payload.
    double weight_gain = 1.0;
    std::vector<double> params;
    PoseProjection pose_projection;  // fixed alongside the learned parameters

    int cm() const { return c_pose + c_image; }
    int ca() const { return c_pose + c_image + 1; }
    size_t vox() const {
        return static_cast<size_t>(payload_res) * payload_res * payload_res;
    }
    size_t motion_w() const { return 0; }
    size_t motion_b() const { return motion_w() + 9 * cm(); }
    size_t opacity_w() const { return motion_b() + static_cast<size_t>(texel_count) * 9; }
    size_t opacity_b() const { return opacity_w() + vox() * cm(); }
    size_t appearance_w() const { return opacity_b() + static_cast<size_t>(texel_count) * vox(); }
    size_t appearance_b() const { return appearance_w() + 3 * vox() * ca(); }
    size_t total() const { return appearance_b() + static_cast<size_t>(texel_count) * 3 * vox(); }

    static DecoderParams init(int c_pose, int c_image, int payload_res, int resolution,
                              int texel_count, double motion_scale, uint64_t seed,
                              double weight_scale = 0.01, double opacity_bias = 0.0,
                              double weight_gain = 1.0);
};

struct DecodeResult {
    std::vector<Correctives> correctives;  // per valid texel
    std::vector<double> rgb;               // K * 3 * S^3, in [0,1]
    std::vector<double> alpha;             // K * S^3, >= 0
};

DecodeResult decode(const FeatureMaps& features, const DecoderParams& params,
                    const TexelGrid& grid);

// Appearance branch alone; motion and opacity do not depend on the view
// feature, so per-view work only needs this.
std::vector<double> decode_appearance(const FeatureMaps& features, const DecoderParams& params,
                                      const TexelGrid& grid);

struct DecodeGrads {
    std::vector<double> params;  // same layout as DecoderParams::params
    FeatureMaps features;        // gradients w.r.t. the inputs
};

// Exact adjoint of decode. Upstream gradients are w.r.t. the final
// correctives and the activated payloads.
DecodeGrads decode_backward(const FeatureMaps& features, const DecoderParams& params,
                            const TexelGrid& grid, const DecodeResult& result,
                            const std::vector<Correctives>& d_correctives,
                            const std::vector<double>& d_rgb, const std::vector<double>& d_alpha);

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace avp
