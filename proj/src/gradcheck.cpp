#include "avp/gradcheck.hpp"

#include <chrono>
#include <cmath>

#include "avp/loss.hpp"
#include "avp/oracle.hpp"

namespace avp {

namespace {

struct ClassAccum {
    std::string name;
    std::vector<std::pair<double, double>> pairs;  // (adjoint, fd)

    void finish(GradCheckReport& report) {
        double scale = 0.0;
        for (auto& [a, f] : pairs) scale = std::max(scale, std::abs(f));
        GradCheckClass cls;
        cls.name = name;
        cls.checked = static_cast<int>(pairs.size());
        for (auto& [a, f] : pairs) {
            double denom = std::max({std::abs(a), std::abs(f), 1e-3 * scale, 1e-12});
            cls.worst_rel = std::max(cls.worst_rel, std::abs(a - f) / denom);
        }
        report.classes.push_back(cls);
    }
};

ClassAccum& find_class(std::vector<ClassAccum>& accum, const std::string& name) {
    for (auto& c : accum)
        if (c.name == name) return c;
    accum.push_back(ClassAccum{name, {}});
    return accum.back();
}

}  // namespace

PrimitiveSet random_primitive_set(Rng& rng, int count, int payload_res, double alpha_scale) {
    PrimitiveSet set;
    set.count = count;
    set.payload_res = payload_res;
    const size_t vox = set.voxels();
    set.position.resize(count);
    set.rotation.resize(count);
    set.scale.resize(count);
    set.texel.resize(count);
    set.rgb.resize(static_cast<size_t>(count) * 3 * vox);
    set.alpha.resize(static_cast<size_t>(count) * vox);

    const int S = payload_res;
    for (int k = 0; k < count; ++k) {
        set.texel[k] = k;
        set.position[k] = Vec3{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                               rng.uniform(-0.4, 0.4)};
        Vec3 axis{rng.gaussian(), rng.gaussian(), rng.gaussian()};
        set.rotation[k] = so3_exp(normalized(axis) * rng.uniform(0, M_PI * 0.9));
        set.scale[k] = Vec3{rng.uniform(0.25, 0.55), rng.uniform(0.25, 0.55),
                            rng.uniform(0.25, 0.55)};

        // Smooth low-frequency payloads keep finite differences well behaved.
        double fx = 1 + rng.bounded(2), fy = 1 + rng.bounded(2), fz = 1 + rng.bounded(2);
        double phase_a = rng.uniform(0, 2 * M_PI);
        double phase_c[3] = {rng.uniform(0, 2 * M_PI), rng.uniform(0, 2 * M_PI),
                             rng.uniform(0, 2 * M_PI)};
        double* rgb = set.rgb_of(k);
        double* alpha = set.alpha_of(k);
        for (int z = 0; z < S; ++z)
            for (int y = 0; y < S; ++y)
                for (int x = 0; x < S; ++x) {
                    size_t idx = (static_cast<size_t>(z) * S + y) * S + x;
                    double arg = 2 * M_PI * (fx * x + fy * y + fz * z) / (3.0 * S);
                    alpha[idx] = alpha_scale * (0.55 + 0.45 * std::sin(arg + phase_a));
                    for (int c = 0; c < 3; ++c)
                        rgb[c * vox + idx] =
                            std::clamp(0.5 + 0.35 * std::sin(arg * (c + 1) * 0.7 + phase_c[c]),
                                       0.0, 1.0);
                }
    }
    return set;
}

Camera micro_camera(Rng& rng, const Vec3& target, double distance, int res) {
    Vec3 dir{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    dir = normalized(dir);
    if (norm(dir) == 0.0) dir = Vec3{0, 0, 1};
    Vec3 eye = target + dir * distance;
    Vec3 fwd = normalized(target - eye);
    Vec3 up_hint = std::abs(fwd.y) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
    Vec3 right = normalized(cross(fwd, up_hint));
    Vec3 up = cross(fwd, right);
    Camera cam;
    cam.rotation = Mat3::from_columns(right, up, fwd).transposed();
    cam.translation = -(cam.rotation * eye);
    cam.fx = cam.fy = res * 1.2;
    cam.cx = cam.cy = res * 0.5;
    cam.width = cam.height = res;
    return cam;
}

GradCheckReport gradcheck_render(int scene_count, uint64_t seed, double fd_step) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<ClassAccum> accum;

    for (int scene = 0; scene < scene_count; ++scene) {
        Rng rng(seed + 977 * scene + 1);
        int K = 1 + static_cast<int>(rng.bounded(4));
        PrimitiveSet set = random_primitive_set(rng, K, 4, 1.1);
        Camera cam = micro_camera(rng, Vec3{0, 0, 0}, 2.6, 4);

        RenderConfig cfg;
        cfg.step_size = 0.07;
        cfg.background = Vec3{0.15, 0.25, 0.1};
        cfg.threads = 1;

        const size_t npix = static_cast<size_t>(cam.width) * cam.height;
        std::vector<double> grad_rgb(npix * 3), grad_alpha(npix);
        for (double& v : grad_rgb) v = rng.uniform(-1, 1);
        for (double& v : grad_alpha) v = rng.uniform(-1, 1);

        auto loss_of = [&](const PrimitiveSet& s) {
            RenderOutput out = render(s, cam, cfg);
            double acc = 0;
            for (size_t i = 0; i < out.rgb.size(); ++i) acc += grad_rgb[i] * out.rgb[i];
            for (size_t i = 0; i < out.alpha.size(); ++i) acc += grad_alpha[i] * out.alpha[i];
            return acc;
        };

        SceneGrads adj = render_backward(set, cam, cfg, grad_rgb, grad_alpha);
        const double h = fd_step;

        for (int k = 0; k < K; ++k) {
            for (int i = 0; i < 3; ++i) {
                {
                    PrimitiveSet s = set;
                    s.position[k][i] += h;
                    double lp = loss_of(s);
                    s.position[k][i] -= 2 * h;
                    double lm = loss_of(s);
                    find_class(accum, "position")
                        .pairs.emplace_back(adj.d_position[k][i], (lp - lm) / (2 * h));
                }
                {
                    Vec3 e{0, 0, 0};
                    e[i] = h;
                    PrimitiveSet s = set;
                    s.rotation[k] = so3_exp(e) * set.rotation[k];
                    double lp = loss_of(s);
                    s.rotation[k] = so3_exp(-1.0 * e) * set.rotation[k];
                    double lm = loss_of(s);
                    find_class(accum, "rotation")
                        .pairs.emplace_back(adj.d_rotation[k][i], (lp - lm) / (2 * h));
                }
                {
                    PrimitiveSet s = set;
                    s.scale[k][i] += h;
                    double lp = loss_of(s);
                    s.scale[k][i] -= 2 * h;
                    double lm = loss_of(s);
                    find_class(accum, "scale")
                        .pairs.emplace_back(adj.d_scale[k][i], (lp - lm) / (2 * h));
                }
            }
        }

        const size_t vox = set.voxels();
        for (int pick = 0; pick < 24; ++pick) {
            size_t idx = rng.bounded(set.alpha.size());
            PrimitiveSet s = set;
            s.alpha[idx] += h;
            double lp = loss_of(s);
            s.alpha[idx] -= 2 * h;
            double lm = loss_of(s);
            find_class(accum, "payload_alpha")
                .pairs.emplace_back(adj.d_alpha[idx], (lp - lm) / (2 * h));
        }
        for (int pick = 0; pick < 24; ++pick) {
            size_t idx = rng.bounded(set.rgb.size());
            PrimitiveSet s = set;
            s.rgb[idx] += h;
            double lp = loss_of(s);
            s.rgb[idx] -= 2 * h;
            double lm = loss_of(s);
            find_class(accum, "payload_rgb")
                .pairs.emplace_back(adj.d_rgb[idx], (lp - lm) / (2 * h));
        }
        (void)vox;
    }

    GradCheckReport report;
    for (auto& c : accum) c.finish(report);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

namespace {

// Tiny one-joint quad dataset driving the decoder end to end.
FitDataset micro_dataset(Rng& rng) {
    FitDataset data;
    data.skeleton.parent = {kNoParent};
    data.skeleton.rest_local = {Rigid::identity()};

    TemplateMesh& mesh = data.mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    mesh.uv = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    std::array<SkinWeight, kMaxSkinInfluences> w{};
    w[0] = {0, 1.0};
    mesh.skin_weights = {w, w, w, w};
    mesh.triangles = {{0, 1, 2}, {0, 2, 3}};

    data.poses = {Pose::identity(1)};
    data.texel_resolution = 2;
    data.payload_res = 4;
    data.thickness_factor = 1.0;
    data.unwrap_resolution = 4;

    for (int v = 0; v < 2; ++v) {
        Vec3 target{0.5, 0.5, 0.0};
        Vec3 dir{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0};
        dir = normalized(dir);
        Vec3 eye = target + dir * 2.3;
        Vec3 fwd = normalized(target - eye);
        Vec3 right = normalized(cross(fwd, Vec3{0, 1, 0}));
        Vec3 up = cross(fwd, right);
        Camera cam;
        cam.rotation = Mat3::from_columns(right, up, fwd).transposed();
        cam.translation = -(cam.rotation * eye);
        cam.fx = cam.fy = 4.5;
        cam.cx = cam.cy = 2.0;
        cam.width = cam.height = 4;
        data.cameras.push_back(cam);
    }

    // Targets from the oracle over a ground-truth payload on the quad basis.
    TexelGrid grid = build_texel_grid(mesh, data.texel_resolution);
    PosedMesh posed = pose_mesh(data.skeleton, data.poses[0], mesh);
    std::vector<PrimitiveBasis> basis = init_basis(mesh, posed, grid, BasisConfig{1.0});
    std::vector<Correctives> zero(basis.size());
    PrimitiveSet gt = apply_correctives(basis, zero, grid.valid_texels, data.payload_res);
    PrimitiveSet noise =
        random_primitive_set(rng, gt.count, data.payload_res, 1.0);
    gt.rgb = noise.rgb;
    gt.alpha = noise.alpha;

    data.targets.resize(1);
    data.silhouettes.resize(1);
    for (const Camera& cam : data.cameras) {
        OracleOutput oracle = oracle_render(gt, cam, 1024, Vec3{0.1, 0.1, 0.15});
        Image sil(cam.width, cam.height, 1);
        for (size_t i = 0; i < sil.data.size(); ++i)
            sil.data[i] = oracle.alpha.data[i] >= 0.5 ? 1.0 : 0.0;
        data.targets[0].push_back(oracle.rgb);
        data.silhouettes[0].push_back(sil);
    }
    return data;
}

}  // namespace

GradCheckReport gradcheck_full(int scene_count, uint64_t seed, double fd_step) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<ClassAccum> accum;

    for (int scene = 0; scene < scene_count; ++scene) {
        Rng rng(seed + 1709 * scene + 11);
        FitDataset data = micro_dataset(rng);

        FitConfig config;
        config.render_config.step_size = 0.05;
        config.render_config.background = Vec3{0.1, 0.1, 0.15};
        config.render_config.threads = 1;
        config.pose_feature_channels = 16;
        config.seed = seed + scene;

        PoseProjection proj =
            PoseProjection::random_orthonormal(config.pose_feature_channels, 1, rng);
        FitContext ctx = FitContext::build(data, config, proj);

        DecoderParams params = DecoderParams::init(
            proj.c_out, 3, data.payload_res, data.texel_resolution,
            static_cast<int>(ctx.grid.valid_texels.size()), 0.05 * ctx.scene_diagonal,
            config.seed, 0.3, 0.2);
        params.pose_projection = proj;

        LossWeights weights;  // defaults: 1.0 / 0.1 / 0.01
        std::vector<int> views{0, 1};
        std::vector<double> grad;
        fit_loss(ctx, params, 0, views, weights, &grad);

        struct Group {
            const char* name;
            size_t off, size;
        };
        const Group groups[] = {
            {"motion_w", params.motion_w(), 9 * static_cast<size_t>(params.cm())},
            {"motion_b", params.motion_b(), static_cast<size_t>(params.texel_count) * 9},
            {"opacity_w", params.opacity_w(), params.vox() * params.cm()},
            {"opacity_b", params.opacity_b(),
             static_cast<size_t>(params.texel_count) * params.vox()},
            {"appearance_w", params.appearance_w(), 3 * params.vox() * params.ca()},
            {"appearance_b", params.appearance_b(),
             static_cast<size_t>(params.texel_count) * 3 * params.vox()},
        };

        const double h = fd_step;
        for (const Group& g : groups) {
            int picks = static_cast<int>(std::min<size_t>(8, g.size));
            for (int p = 0; p < picks; ++p) {
                size_t idx = g.off + rng.bounded(g.size);
                DecoderParams pp = params;
                pp.params[idx] += h;
                double lp = fit_loss(ctx, pp, 0, views, weights, nullptr).total;
                pp.params[idx] -= 2 * h;
                double lm = fit_loss(ctx, pp, 0, views, weights, nullptr).total;
                find_class(accum, g.name).pairs.emplace_back(grad[idx], (lp - lm) / (2 * h));
            }
        }
    }

    GradCheckReport report;
    for (auto& c : accum) c.finish(report);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace avp
