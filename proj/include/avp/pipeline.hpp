#pragma once

#include <string>
#include <vector>

#include "avp/fit.hpp"
#include "avp/image.hpp"
#include "avp/synth.hpp"

namespace avp {

// Shared command implementations behind the CLI and the python module.

// Quarter of the median primitive half-extent at frame 0.
double default_render_step(const SyntheticScene& scene);

struct RenderSceneResult {
    Image rgb;
    Image alpha;
};

// Renders one (frame, camera) of a generated scene. params_path may name a
// primitive-set file (texel-attached payloads, transforms re-derived from the
// frame's articulation) or a decoder checkpoint (conditioned on cond_views,
// all non-holdout views when empty). An empty params_path uses the scene's
// ground truth. step_size 0 picks the default marching step.
RenderSceneResult render_scene(const std::string& scene_dir, int frame, int camera,
                               const std::string& params_path = "", double step_size = 0.0,
                               const std::vector<int>& cond_views = {});

struct EvalRow {
    int frame = 0;
    int view = 0;
    double psnr_db = 0.0;
};

// PSNR of rendered holdout views against the stored targets.
std::vector<EvalRow> eval_scene(const std::string& scene_dir, const std::string& params_path,
                                const std::vector<int>& holdout_views, double step_size = 0.0);

// Multi-view unwrap of the stored target images for one frame.
UvImage unwrap_scene(const std::string& scene_dir, int frame, int resolution = 0);

// Runs fit on a generated scene, writing checkpoints and the metrics CSV into
// out_dir (unless empty).
FitResult fit_scene(const std::string& scene_dir, const FitConfig& config,
                    const std::string& out_dir);

}  // namespace avp
