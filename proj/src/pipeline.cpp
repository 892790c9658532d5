#include "avp/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "avp/io.hpp"
#include "avp/raymarch.hpp"

namespace avp {

namespace fs = std::filesystem;

namespace {

std::vector<double> half_extents(const std::vector<PrimitiveBasis>& basis) {
    std::vector<double> all;
    all.reserve(basis.size() * 3);
    for (const PrimitiveBasis& b : basis)
        for (int i = 0; i < 3; ++i) all.push_back(b.scale[i]);
    return all;
}

double quarter_median(const std::vector<PrimitiveBasis>& basis) {
    std::vector<double> all = half_extents(basis);
    if (all.empty()) return 1e-2;
    std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
    return 0.25 * all[all.size() / 2];
}

PrimitiveSet posed_gt_set(const LoadedScene& loaded, const TexelGrid& grid, int frame,
                          const PrimitiveSet& payload_source) {
    const SyntheticScene& scene = loaded.scene;
    if (payload_source.count != static_cast<int>(grid.valid_texels.size()) ||
        payload_source.payload_res != scene.payload_res)
        throw Error(ErrorKind::Format, "primitive payload shape does not match the scene atlas");
    PosedMesh posed = pose_mesh(scene.skeleton, scene.poses.at(frame), scene.mesh);
    std::vector<PrimitiveBasis> basis =
        init_basis(scene.mesh, posed, grid, BasisConfig{scene.thickness_factor});
    std::vector<Correctives> zero(basis.size());
    PrimitiveSet set = apply_correctives(basis, zero, grid.valid_texels, scene.payload_res);
    set.rgb = payload_source.rgb;
    set.alpha = payload_source.alpha;
    return set;
}

std::vector<int> all_views_except(int view_count, const std::vector<int>& excluded) {
    std::vector<int> views;
    for (int v = 0; v < view_count; ++v)
        if (std::find(excluded.begin(), excluded.end(), v) == excluded.end()) views.push_back(v);
    return views;
}

}  // namespace

double default_render_step(const SyntheticScene& scene) {
    TexelGrid grid = build_texel_grid(scene.mesh, scene.texel_resolution);
    PosedMesh posed = pose_mesh(scene.skeleton, scene.poses.at(0), scene.mesh);
    std::vector<PrimitiveBasis> basis =
        init_basis(scene.mesh, posed, grid, BasisConfig{scene.thickness_factor});
    return quarter_median(basis);
}

RenderSceneResult render_scene(const std::string& scene_dir, int frame, int camera,
                               const std::string& params_path, double step_size,
                               const std::vector<int>& cond_views) {
    LoadedScene loaded = load_scene(scene_dir);
    const SyntheticScene& scene = loaded.scene;
    if (frame < 0 || frame >= scene.frame_count())
        throw Error(ErrorKind::Usage, "frame index out of range");
    if (camera < 0 || camera >= scene.view_count())
        throw Error(ErrorKind::Usage, "camera index out of range");

    RenderConfig cfg;
    cfg.background = scene.background;
    cfg.step_size = step_size > 0 ? step_size : default_render_step(scene);

    RenderOutput out;
    std::string path = params_path.empty() ? loaded.gt_params_path : params_path;
    if (peek_params_kind(path) == ParamsKind::PrimitiveSet) {
        TexelGrid grid = build_texel_grid(scene.mesh, scene.texel_resolution);
        PrimitiveSet payloads = read_primitive_set(path);
        PrimitiveSet set = posed_gt_set(loaded, grid, frame, payloads);
        out = render(set, scene.cameras[camera], cfg);
    } else {
        DecoderParams params = read_decoder_params(path);
        FitConfig fit_cfg;
        fit_cfg.render_config = cfg;
        FitContext ctx = FitContext::build(loaded.dataset, fit_cfg, params.pose_projection);
        ctx.render_config = cfg;
        std::vector<int> cond =
            cond_views.empty() ? all_views_except(scene.view_count(), {}) : cond_views;
        out = render_through_decoder(ctx, params, frame, camera, cond);
    }

    RenderSceneResult result;
    result.rgb = Image(out.width, out.height, 3);
    result.rgb.data = out.rgb;
    result.alpha = Image(out.width, out.height, 1);
    result.alpha.data = out.alpha;
    return result;
}

std::vector<EvalRow> eval_scene(const std::string& scene_dir, const std::string& params_path,
                                const std::vector<int>& holdout_views, double step_size) {
    LoadedScene loaded = load_scene(scene_dir);
    const SyntheticScene& scene = loaded.scene;
    for (int v : holdout_views)
        if (v < 0 || v >= scene.view_count())
            throw Error(ErrorKind::Usage, "holdout camera index out of range");
    // Evaluation defaults to a finer step than interactive rendering.
    if (step_size <= 0) step_size = 0.5 * default_render_step(scene);

    std::vector<int> cond = all_views_except(scene.view_count(), holdout_views);
    std::vector<EvalRow> rows;
    for (int f = 0; f < scene.frame_count(); ++f) {
        for (int v : holdout_views) {
            RenderSceneResult r = render_scene(scene_dir, f, v, params_path, step_size, cond);
            rows.push_back({f, v, psnr(r.rgb, loaded.dataset.targets[f][v])});
        }
    }
    return rows;
}

UvImage unwrap_scene(const std::string& scene_dir, int frame, int resolution) {
    LoadedScene loaded = load_scene(scene_dir);
    const SyntheticScene& scene = loaded.scene;
    if (frame < 0 || frame >= scene.frame_count())
        throw Error(ErrorKind::Usage, "frame index out of range");
    int res = resolution > 0 ? resolution : scene.unwrap_resolution;
    PosedMesh posed = pose_mesh(scene.skeleton, scene.poses[frame], scene.mesh);
    return unwrap_views(posed, scene.mesh, scene.cameras, loaded.dataset.targets[frame], res);
}

FitResult fit_scene(const std::string& scene_dir, const FitConfig& config,
                    const std::string& out_dir) {
    LoadedScene loaded = load_scene(scene_dir);
    CheckpointFn on_checkpoint = nullptr;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        on_checkpoint = [out_dir](int iteration, const DecoderParams& params) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "/checkpoint_%06d.bin", iteration);
            write_decoder_params(out_dir + buf, params);
        };
    }
    FitResult result = fit(loaded.dataset, config, on_checkpoint);
    if (!out_dir.empty()) {
        write_decoder_params(out_dir + "/params.bin", result.params);
        write_metrics_csv(out_dir + "/metrics.csv", result.log);
    }
    return result;
}

}  // namespace avp
