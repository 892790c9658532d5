#include "avp/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace avp {

void FitDataset::validate() const {
    skeleton.validate();
    mesh.validate(skeleton.joint_count());
    if (poses.empty() || cameras.empty())
        throw Error(ErrorKind::Usage, "dataset needs at least one frame and one view");
    if (targets.size() != poses.size() || silhouettes.size() != poses.size())
        throw Error(ErrorKind::Format, "dataset frame count mismatch");
    for (size_t f = 0; f < poses.size(); ++f) {
        if (targets[f].size() != cameras.size() || silhouettes[f].size() != cameras.size())
            throw Error(ErrorKind::Format, "dataset view count mismatch");
    }
    if (unwrap_resolution < texel_resolution || unwrap_resolution % texel_resolution != 0)
        throw Error(ErrorKind::Format, "unwrap resolution must be a multiple of W");
}

std::vector<int> select_views(int iteration, const std::vector<int>& all_views,
                              const FitConfig& config, Rng& rng) {
    if (iteration < config.dense_phase_iterations) return all_views;
    const int n = static_cast<int>(all_views.size());
    const int take = std::min(config.sparse_view_count, n);
    // Partial Fisher-Yates over a copy keeps draws independent of `take`.
    std::vector<int> pool = all_views;
    std::vector<int> out;
    out.reserve(take);
    for (int i = 0; i < take; ++i) {
        int j = i + static_cast<int>(rng.bounded(static_cast<uint64_t>(n - i)));
        std::swap(pool[i], pool[j]);
        out.push_back(pool[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

double median_half_extent(const std::vector<PrimitiveBasis>& basis) {
    std::vector<double> all;
    all.reserve(basis.size() * 3);
    for (const PrimitiveBasis& b : basis)
        for (int i = 0; i < 3; ++i) all.push_back(b.scale[i]);
    if (all.empty()) return 1e-2;
    std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
    return all[all.size() / 2];
}

Aabb canonical_bounds(const TemplateMesh& mesh) {
    Aabb box;
    if (!mesh.vertices.empty()) box.lo = box.hi = mesh.vertices[0];
    for (const Vec3& v : mesh.vertices) box.expand(v);
    return box;
}

// Multi-view texture from precomputed per-view accumulators.
UvImage texture_from_accumulators(const std::vector<UnwrapAccumulator>& accum,
                                  const std::vector<int>& views) {
    UvImage tex;
    if (views.empty()) throw Error(ErrorKind::Usage, "texture needs at least one view");
    const UnwrapAccumulator& first = accum[views[0]];
    tex.channels = first.channels;
    tex.resolution = first.resolution;
    tex.data.assign(first.color_sum.size(), 0.0);
    tex.weight.assign(first.weight.size(), 0.0);
    for (int v : views) {
        for (size_t i = 0; i < tex.data.size(); ++i) tex.data[i] += accum[v].color_sum[i];
        for (size_t i = 0; i < tex.weight.size(); ++i) tex.weight[i] += accum[v].weight[i];
    }
    const size_t plane = tex.weight.size();
    for (size_t i = 0; i < plane; ++i) {
        if (tex.weight[i] > 0.0)
            for (int c = 0; c < tex.channels; ++c) tex.data[c * plane + i] /= tex.weight[i];
    }
    return tex;
}

FeatureMaps assemble_features(const FitContext& ctx, const DecoderParams& params, int frame,
                              const std::vector<int>& cond_views, int view) {
    FeatureMaps fm;
    fm.resolution = ctx.grid.resolution;
    fm.pose_channels = params.c_pose;
    fm.image_channels = params.c_image;
    fm.pose = ctx.pose_feats[frame];
    UvImage tex = texture_from_accumulators(ctx.accum[frame], cond_views);
    fm.image = image_features(tex, ctx.grid.resolution);
    fm.view = view_features(ctx.data->cameras[view], ctx.posed[frame], ctx.data->mesh, ctx.grid);
    return fm;
}

PrimitiveSet build_set(const FitContext& ctx, int frame, const DecodeResult& dec,
                       const std::vector<double>& rgb_payload) {
    PrimitiveSet set = apply_correctives(ctx.basis[frame], dec.correctives,
                                         ctx.grid.valid_texels, ctx.data->payload_res);
    set.alpha = dec.alpha;
    set.rgb = rgb_payload;
    return set;
}

}  // namespace

FitContext FitContext::build(const FitDataset& data, const FitConfig& config,
                             const PoseProjection& proj) {
    data.validate();
    config.validate();

    FitContext ctx;
    ctx.data = &data;
    ctx.grid = build_texel_grid(data.mesh, data.texel_resolution);
    ctx.scene_diagonal = norm(canonical_bounds(data.mesh).diagonal());

    const int F = data.frame_count();
    const int V = data.view_count();
    ctx.posed.resize(F);
    ctx.basis.resize(F);
    ctx.pose_feats.resize(F);
    ctx.accum.resize(F);

    TexelGrid unwrap_grid = build_texel_grid(data.mesh, data.unwrap_resolution);
    BasisConfig basis_config{data.thickness_factor};

    for (int f = 0; f < F; ++f) {
        ctx.posed[f] = pose_mesh(data.skeleton, data.poses[f], data.mesh);
        ctx.basis[f] = init_basis(data.mesh, ctx.posed[f], ctx.grid, basis_config);
        ctx.pose_feats[f] = pose_features(data.poses[f], data.skeleton, data.mesh, ctx.grid, proj);
        ctx.accum[f].resize(V);
        for (int v = 0; v < V; ++v) {
            ctx.accum[f][v] = unwrap_single_view(ctx.posed[f], data.mesh, data.cameras[v],
                                                 data.targets[f][v], data.unwrap_resolution,
                                                 unwrap_grid);
        }
    }

    ctx.render_config = config.render_config;
    if (ctx.render_config.step_size <= 0.0) {
        double med = 0.0;
        for (int f = 0; f < F; ++f) med += median_half_extent(ctx.basis[f]);
        med /= F;
        ctx.render_config.step_size = std::max(1e-6, config.step_scale * med);
    }
    return ctx;
}

LossTerms fit_loss(const FitContext& ctx, const DecoderParams& params, int frame,
                   const std::vector<int>& views, const LossWeights& weights,
                   std::vector<double>* grad_out) {
    weights.validate();
    if (views.empty()) throw Error(ErrorKind::Usage, "fit_loss needs at least one view");
    const FitDataset& data = *ctx.data;
    const double nv = static_cast<double>(views.size());

    // Motion and opacity are view-independent; decode them once with the
    // first view's features.
    FeatureMaps fm0 = assemble_features(ctx, params, frame, views, views[0]);
    DecodeResult dec0 = decode(fm0, params, ctx.grid);

    std::vector<RenderOutput> renders(views.size());
    std::vector<FeatureMaps> fms(views.size());
    std::vector<DecodeResult> decs(views.size());

    for (size_t i = 0; i < views.size(); ++i) {
        if (i == 0) {
            fms[i] = fm0;
            decs[i] = dec0;
        } else {
            fms[i] = fm0;
            fms[i].view = view_features(data.cameras[views[i]], ctx.posed[frame], data.mesh,
                                        ctx.grid);
            decs[i].rgb = decode_appearance(fms[i], params, ctx.grid);
        }
        PrimitiveSet set = build_set(ctx, frame, dec0, decs[i].rgb);
        renders[i] = render(set, data.cameras[views[i]], ctx.render_config);
    }

    // Shared geometry for the loss terms (payloads identical across views
    // except appearance, which loss_vol ignores).
    PrimitiveSet set0 = build_set(ctx, frame, dec0, decs[0].rgb);

    LossTerms terms;
    std::vector<std::vector<double>> g_rgb(views.size()), g_alpha(views.size());
    std::vector<Vec3> g_vol_scale;
    for (size_t i = 0; i < views.size(); ++i) {
        int v = views[i];
        terms.rgb += loss_rgb(renders[i], data.targets[frame][v], nullptr,
                              grad_out ? &g_rgb[i] : nullptr) /
                     nv;
        terms.mask += loss_mask(renders[i], data.silhouettes[frame][v],
                                grad_out ? &g_alpha[i] : nullptr) /
                      nv;
        if (weights.lambda_ms > 0.0)
            terms.ms += loss_multiscale(renders[i], data.targets[frame][v]) / nv;
    }
    terms.vol = loss_vol(set0, grad_out ? &g_vol_scale : nullptr);
    terms.total = weights.lambda_rgb * terms.rgb + weights.lambda_m * terms.mask +
                  weights.lambda_vol * terms.vol + weights.lambda_ms * terms.ms;

    if (!grad_out) return terms;

    grad_out->assign(params.params.size(), 0.0);

    // Accumulated geometry gradients (shared across views).
    std::vector<Vec3> d_pos(set0.count, Vec3{0, 0, 0});
    std::vector<Vec3> d_rot(set0.count, Vec3{0, 0, 0});
    std::vector<Vec3> d_scale(set0.count, Vec3{0, 0, 0});
    std::vector<double> d_alpha(set0.alpha.size(), 0.0);

    for (size_t i = 0; i < views.size(); ++i) {
        int v = views[i];
        // Per-pixel upstream gradients: the per-view loss gradients scaled by
        // the lambda weights and the 1/nv batch average.
        std::vector<double> up_rgb(g_rgb[i].size());
        for (size_t j = 0; j < up_rgb.size(); ++j)
            up_rgb[j] = weights.lambda_rgb * g_rgb[i][j] / nv;
        std::vector<double> up_alpha(g_alpha[i].size());
        for (size_t j = 0; j < up_alpha.size(); ++j)
            up_alpha[j] = weights.lambda_m * g_alpha[i][j] / nv;
        if (weights.lambda_ms > 0.0) {
            std::vector<double> g_ms;
            loss_multiscale(renders[i], data.targets[frame][v], &g_ms);
            for (size_t j = 0; j < up_rgb.size(); ++j)
                up_rgb[j] += weights.lambda_ms * g_ms[j] / nv;
        }

        PrimitiveSet set = build_set(ctx, frame, dec0, decs[i].rgb);
        SceneGrads sg = render_backward(set, data.cameras[v], ctx.render_config, up_rgb, up_alpha);

        for (int k = 0; k < set.count; ++k) {
            d_pos[k] += sg.d_position[k];
            d_rot[k] += sg.d_rotation[k];
            d_scale[k] += sg.d_scale[k];
        }
        for (size_t j = 0; j < d_alpha.size(); ++j) d_alpha[j] += sg.d_alpha[j];

        // Appearance payload gradient flows through this view's decode.
        DecodeGrads dg = decode_backward(fms[i], params, ctx.grid, decs[i], {}, sg.d_rgb, {});
        for (size_t j = 0; j < grad_out->size(); ++j) (*grad_out)[j] += dg.params[j];
    }

    // Volume prior on the shared geometry.
    for (int k = 0; k < set0.count; ++k) d_scale[k] += g_vol_scale[k] * weights.lambda_vol;

    // Chain transform gradients through apply_correctives into the motion
    // branch, then through decode for motion + opacity.
    std::vector<Correctives> d_corr(set0.count);
    for (int k = 0; k < set0.count; ++k) {
        CorrectiveGrads cg = apply_correctives_backward(ctx.basis[frame][k], dec0.correctives[k],
                                                        d_pos[k], d_rot[k], d_scale[k]);
        d_corr[k] = Correctives{cg.d_position, cg.d_rotation, cg.d_scale};
    }
    DecodeGrads dg = decode_backward(fm0, params, ctx.grid, dec0, d_corr, {}, d_alpha);
    for (size_t j = 0; j < grad_out->size(); ++j) (*grad_out)[j] += dg.params[j];

    return terms;
}

RenderOutput render_through_decoder(const FitContext& ctx, const DecoderParams& params, int frame,
                                    int view, const std::vector<int>& cond_views) {
    FeatureMaps fm = assemble_features(ctx, params, frame, cond_views, view);
    DecodeResult dec = decode(fm, params, ctx.grid);
    PrimitiveSet set = build_set(ctx, frame, dec, dec.rgb);
    return render(set, ctx.data->cameras[view], ctx.render_config);
}

FitResult fit(const FitDataset& data, const FitConfig& config, const CheckpointFn& on_checkpoint) {
    data.validate();
    config.validate();

    std::vector<int> training_views;
    for (int v = 0; v < data.view_count(); ++v) {
        if (std::find(config.holdout_views.begin(), config.holdout_views.end(), v) ==
            config.holdout_views.end())
            training_views.push_back(v);
    }
    if (training_views.empty()) throw Error(ErrorKind::Usage, "no training views left");

    Rng proj_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    PoseProjection proj = PoseProjection::random_orthonormal(config.pose_feature_channels,
                                                             data.skeleton.joint_count(), proj_rng);

    FitContext ctx = FitContext::build(data, config, proj);

    double motion_scale = config.motion_scale > 0.0 ? config.motion_scale
                                                    : 0.01 * ctx.scene_diagonal;
    FitState state{DecoderParams::init(proj.c_out, 3, data.payload_res, data.texel_resolution,
                                       static_cast<int>(ctx.grid.valid_texels.size()),
                                       motion_scale, config.seed, config.weight_init_scale,
                                       config.opacity_bias_init, config.decoder_weight_gain),
                   AdamState{}, 0, Rng(config.seed)};
    state.params.pose_projection = proj;
    state.adam.init(state.params.params.size());

    FitResult result;
    result.log.reserve(config.iterations);
    std::vector<double> grads;

    for (int it = 0; it < config.iterations; ++it) {
        auto t0 = std::chrono::steady_clock::now();
        int frame = data.frame_count() > 0 ? it % data.frame_count() : 0;
        std::vector<int> views = select_views(it, training_views, config, state.rng);

        LossTerms terms = fit_loss(ctx, state.params, frame, views, config.loss_weights, &grads);
        if (!std::isfinite(terms.total)) {
            throw Error(ErrorKind::Numeric,
                        "non-finite loss at iteration " + std::to_string(it) + " (rgb=" +
                            std::to_string(terms.rgb) + ", mask=" + std::to_string(terms.mask) +
                            ", vol=" + std::to_string(terms.vol) + ")");
        }
        adam_step(state.params.params, grads, state.adam, config.adam);
        state.iteration = it + 1;

        MetricsRow row;
        row.iteration = it;
        row.terms = terms;
        if (config.eval_every > 0 && !config.holdout_views.empty() &&
            ((it + 1) % config.eval_every == 0 || it + 1 == config.iterations)) {
            double acc = 0.0;
            int n = 0;
            for (int v : config.holdout_views) {
                for (int f = 0; f < data.frame_count(); ++f) {
                    RenderOutput out =
                        render_through_decoder(ctx, state.params, f, v, training_views);
                    Image rendered(out.width, out.height, 3);
                    rendered.data = out.rgb;
                    acc += psnr(rendered, data.targets[f][v]);
                    ++n;
                }
            }
            row.psnr_holdout = acc / std::max(n, 1);
        }
        auto t1 = std::chrono::steady_clock::now();
        row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.log.push_back(row);

        if (on_checkpoint && config.checkpoint_every > 0 &&
            ((it + 1) % config.checkpoint_every == 0 || it + 1 == config.iterations)) {
            on_checkpoint(it + 1, state.params);
        }
    }
    result.params = std::move(state.params);
    return result;
}

}  // namespace avp
