#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "avp/features.hpp"
#include "avp/loss.hpp"
#include "avp/optimizer.hpp"
#include "avp/raymarch.hpp"

namespace avp {

struct FitConfig {
    int iterations = 2000;
    int dense_phase_iterations = 1000;  // N: all views before, sparse subsets after
    int sparse_view_count = 3;
    AdamConfig adam;
    uint64_t seed = 0;
    LossWeights loss_weights;
    RenderConfig render_config;     // step_size 0 -> step_scale * median half-extent
    double step_scale = 0.5;        // used only when render_config.step_size == 0
    std::vector<int> holdout_views; // excluded from training, used for periodic PSNR
    int eval_every = 100;
    int checkpoint_every = 500;
    int pose_feature_channels = 16;
    double motion_scale = 0.0;      // 0 -> 0.05 * scene diagonal
    double weight_init_scale = 0.01;
    double opacity_bias_init = 1.0;
    double decoder_weight_gain = 0.05;

    void validate() const {
        if (iterations < 0 || dense_phase_iterations < 0 ||
            dense_phase_iterations > iterations)
            throw Error(ErrorKind::Usage, "require 0 <= dense_phase_iterations <= iterations");
        if (sparse_view_count < 1)
            throw Error(ErrorKind::Usage, "sparse_view_count must be >= 1");
    }
};

// Everything the fitting loop consumes, already in memory.
struct FitDataset {
    Skeleton skeleton;
    TemplateMesh mesh;
    std::vector<Pose> poses;                      // per frame
    std::vector<Camera> cameras;                  // per view
    std::vector<std::vector<Image>> targets;      // [frame][view], 3 channels
    std::vector<std::vector<Image>> silhouettes;  // [frame][view], 1 channel
    int texel_resolution = 16;   // W
    int payload_res = 8;         // S
    double thickness_factor = 1.0;
    int unwrap_resolution = 128;

    int frame_count() const { return static_cast<int>(poses.size()); }
    int view_count() const { return static_cast<int>(cameras.size()); }
    void validate() const;
};

// Iteration < dense phase: all views. Afterwards: a uniform random subset of
// sparse_view_count views without replacement.
std::vector<int> select_views(int iteration, const std::vector<int>& all_views,
                              const FitConfig& config, Rng& rng);

struct FitState {
    DecoderParams params;
    AdamState adam;
    int iteration = 0;
    Rng rng{0};
};

struct MetricsRow {
    int iteration = 0;
    LossTerms terms;
    double psnr_holdout = std::numeric_limits<double>::quiet_NaN();
    double wall_ms = 0.0;
};

struct FitResult {
    DecoderParams params;
    std::vector<MetricsRow> log;
};

// Precomputed per-scene immutable context shared by fit() and the gradient
// checker.
struct FitContext {
    const FitDataset* data = nullptr;
    TexelGrid grid;
    std::vector<PosedMesh> posed;                       // per frame
    std::vector<std::vector<PrimitiveBasis>> basis;     // per frame
    std::vector<std::vector<double>> pose_feats;        // per frame
    std::vector<std::vector<UnwrapAccumulator>> accum;  // [frame][view]
    RenderConfig render_config;
    double scene_diagonal = 0.0;

    static FitContext build(const FitDataset& data, const FitConfig& config,
                            const PoseProjection& proj);
};

// One supervised step: renders `views` of `frame` through the decoder and
// returns the composite loss; when grad_out is non-null it receives dL/dparams
// (same layout as DecoderParams::params).
LossTerms fit_loss(const FitContext& ctx, const DecoderParams& params, int frame,
                   const std::vector<int>& views, const LossWeights& weights,
                   std::vector<double>* grad_out);

// Renders view `view` of `frame` with conditioning from `cond_views`.
RenderOutput render_through_decoder(const FitContext& ctx, const DecoderParams& params, int frame,
                                    int view, const std::vector<int>& cond_views);

using CheckpointFn = std::function<void(int iteration, const DecoderParams&)>;

FitResult fit(const FitDataset& data, const FitConfig& config,
              const CheckpointFn& on_checkpoint = nullptr);

}  // namespace avp
