#include "doctest.h"

#include "avp/fit.hpp"
#include "avp/gradcheck.hpp"
#include "avp/oracle.hpp"
#include "test_helpers.hpp"

using namespace avp;
using namespace avp::testing;

namespace {

// Small quad dataset: 1 frame, 2 front views, 8x8 pixels.
FitDataset small_dataset(uint64_t seed) {
    FitDataset data;
    data.skeleton = single_joint_skeleton();
    data.mesh = unit_quad();
    data.poses = {Pose::identity(1)};
    data.texel_resolution = 2;
    data.payload_res = 4;
    data.thickness_factor = 1.0;
    data.unwrap_resolution = 8;

    Rng rng(seed);
    for (int v = 0; v < 2; ++v) {
        Vec3 target{0.5, 0.5, 0.0};
        Vec3 eye = target + normalized(Vec3{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), 1.0}) * 2.4;
        Vec3 fwd = normalized(target - eye);
        Vec3 right = normalized(cross(fwd, Vec3{0, 1, 0}));
        Camera cam;
        cam.rotation = Mat3::from_columns(right, cross(fwd, right), fwd).transposed();
        cam.translation = -(cam.rotation * eye);
        cam.fx = cam.fy = 9.0;
        cam.cx = cam.cy = 4.0;
        cam.width = cam.height = 8;
        data.cameras.push_back(cam);
    }

    TexelGrid grid = build_texel_grid(data.mesh, data.texel_resolution);
    PosedMesh posed = pose_mesh(data.skeleton, data.poses[0], data.mesh);
    std::vector<PrimitiveBasis> basis = init_basis(data.mesh, posed, grid, BasisConfig{1.0});
    std::vector<Correctives> zero(basis.size());
    PrimitiveSet gt = apply_correctives(basis, zero, grid.valid_texels, data.payload_res);
    PrimitiveSet noise = random_primitive_set(rng, gt.count, data.payload_res, 1.5);
    gt.rgb = noise.rgb;
    gt.alpha = noise.alpha;

    data.targets.resize(1);
    data.silhouettes.resize(1);
    for (const Camera& cam : data.cameras) {
        OracleOutput oracle = oracle_render(gt, cam, 2048, Vec3{0, 0, 0});
        Image sil(cam.width, cam.height, 1);
        for (size_t i = 0; i < sil.data.size(); ++i)
            sil.data[i] = oracle.alpha.data[i] >= 0.5 ? 1.0 : 0.0;
        data.targets[0].push_back(oracle.rgb);
        data.silhouettes[0].push_back(sil);
    }
    return data;
}

}  // namespace

TEST_CASE("fit with zero iterations returns the seeded initialization") {
    FitDataset data = small_dataset(5);
    FitConfig cfg;
    cfg.iterations = 0;
    cfg.dense_phase_iterations = 0;
    cfg.render_config.threads = 1;
    FitResult a = fit(data, cfg);
    FitResult b = fit(data, cfg);
    CHECK(a.log.empty());
    REQUIRE(a.params.params.size() == b.params.params.size());
    for (size_t i = 0; i < a.params.params.size(); ++i)
        CHECK(a.params.params[i] == b.params.params[i]);
}

TEST_CASE("loss decreases over the first 50 iterations on the small scene") {
    FitDataset data = small_dataset(7);
    FitConfig cfg;
    cfg.iterations = 50;
    cfg.dense_phase_iterations = 50;
    cfg.eval_every = 0;
    cfg.checkpoint_every = 0;
    cfg.render_config.threads = 1;
    FitResult result = fit(data, cfg);
    REQUIRE(result.log.size() == 50);
    CHECK(result.log.back().terms.total < result.log.front().terms.total);
    // Full-batch descent on this scene should make steady progress.
    int increases = 0;
    for (size_t i = 1; i < result.log.size(); ++i)
        if (result.log[i].terms.total > result.log[i - 1].terms.total * 1.001) ++increases;
    CHECK(increases <= 5);
}

TEST_CASE("fit is deterministic under a fixed seed") {
    FitDataset data = small_dataset(11);
    FitConfig cfg;
    cfg.iterations = 8;
    cfg.dense_phase_iterations = 4;  // exercise the sparse branch too
    cfg.sparse_view_count = 1;
    cfg.eval_every = 0;
    cfg.checkpoint_every = 0;
    cfg.seed = 42;
    cfg.render_config.threads = 1;

    FitResult a = fit(data, cfg);
    FitResult b = fit(data, cfg);
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].terms.total == b.log[i].terms.total);
        CHECK(a.log[i].terms.rgb == b.log[i].terms.rgb);
    }
    for (size_t i = 0; i < a.params.params.size(); ++i)
        CHECK(a.params.params[i] == b.params.params[i]);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    FitDataset data = small_dataset(13);
    // Poison a target so the loss goes non-finite immediately.
    data.targets[0][0].data[0] = std::numeric_limits<double>::quiet_NaN();
    FitConfig cfg;
    cfg.iterations = 2;
    cfg.dense_phase_iterations = 2;
    cfg.render_config.threads = 1;
    CHECK_THROWS_AS(fit(data, cfg), Error);
}

TEST_CASE("fit_loss gradient matches finite differences end to end") {
    GradCheckReport report = gradcheck_full(3, 424242ULL);
    for (const auto& cls : report.classes) {
        INFO(cls.name, " worst rel err ", cls.worst_rel);
        CHECK(cls.worst_rel <= 1e-3);
    }
}
