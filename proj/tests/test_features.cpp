#include "doctest.h"

#include <cstring>

#include "avp/features.hpp"
#include "test_helpers.hpp"

using namespace avp;
using namespace avp::testing;

namespace {

// Two-joint strip: left half weighted to joint 0, right half to joint 1.
struct StripFixture {
    Skeleton skeleton;
    TemplateMesh mesh;
    TexelGrid grid;

    StripFixture() {
        skeleton.parent = {kNoParent, 0};
        skeleton.rest_local = {Rigid::identity(), Rigid{Quat::identity(), Vec3{1, 0, 0}}};
        mesh.vertices = {{0, 0, 0}, {2, 0, 0}, {2, 1, 0}, {0, 1, 0}};
        mesh.uv = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        mesh.skin_weights = {one_weight(0), one_weight(1), one_weight(1), one_weight(0)};
        mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
        grid = build_texel_grid(mesh, 4);
    }
};

}  // namespace

TEST_CASE("pose_features masks joints by skinning weight") {
    StripFixture fx;
    Rng rng(171);
    Pose pose = random_pose(rng, 2);
    PoseProjection identity = PoseProjection::identity(2);
    std::vector<double> feats = pose_features(pose, fx.skeleton, fx.mesh, fx.grid, identity);
    const int wsq = 16;

    for (int texel : fx.grid.valid_texels) {
        const auto& e = fx.grid.entries[texel];
        const auto& tri = fx.mesh.triangles[e.triangle];
        double w0 = 0, w1 = 0;
        for (int i = 0; i < 3; ++i) {
            for (const SkinWeight& sw : fx.mesh.skin_weights[tri[i]]) {
                if (sw.weight == 0) continue;
                (sw.joint == 0 ? w0 : w1) += e.barycentric[i] * sw.weight;
            }
        }
        const Quat& q0 = pose.joint_rotations[0];
        const Quat& q1 = pose.joint_rotations[1];
        CHECK(feats[0 * wsq + texel] == doctest::Approx(w0 * q0.w).epsilon(1e-12));
        CHECK(feats[1 * wsq + texel] == doctest::Approx(w0 * q0.x).epsilon(1e-12));
        CHECK(feats[4 * wsq + texel] == doctest::Approx(w1 * q1.w).epsilon(1e-12));
        // Root translation channels carry the root weight.
        CHECK(feats[8 * wsq + texel] ==
              doctest::Approx(w0 * pose.root_translation.x).epsilon(1e-12));
    }
}

TEST_CASE("pose_features with identity pose holds weight-scaled identity quaternions") {
    StripFixture fx;
    PoseProjection identity = PoseProjection::identity(2);
    std::vector<double> feats =
        pose_features(Pose::identity(2), fx.skeleton, fx.mesh, fx.grid, identity);
    const int wsq = 16;
    for (int texel : fx.grid.valid_texels) {
        // w-channel of each joint equals the joint weight; x/y/z are zero.
        CHECK(feats[1 * wsq + texel] == 0.0);
        CHECK(feats[2 * wsq + texel] == 0.0);
        CHECK(feats[5 * wsq + texel] == 0.0);
        double w0 = feats[0 * wsq + texel], w1 = feats[4 * wsq + texel];
        CHECK(w0 + w1 == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("pose_features is linear in the projection") {
    StripFixture fx;
    Rng rng(177);
    Pose pose = random_pose(rng, 2);
    PoseProjection proj = PoseProjection::random_orthonormal(5, 2, rng);
    std::vector<double> a = pose_features(pose, fx.skeleton, fx.mesh, fx.grid, proj);
    PoseProjection doubled = proj;
    for (double& w : doubled.weights) w *= 2.0;
    std::vector<double> b = pose_features(pose, fx.skeleton, fx.mesh, fx.grid, doubled);
    for (size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(2 * a[i]).epsilon(1e-12));
}

TEST_CASE("image_features") {
    SUBCASE("constant texture with uniform weights pools to the constant") {
        UvImage tex;
        tex.channels = 3;
        tex.resolution = 8;
        tex.data.assign(3 * 64, 0.0);
        tex.weight.assign(64, 1.0);
        for (int i = 0; i < 64; ++i) {
            tex.data[i] = 0.7;
            tex.data[64 + i] = 0.3;
            tex.data[128 + i] = 0.9;
        }
        std::vector<double> f = image_features(tex, 4);
        for (int i = 0; i < 16; ++i) {
            CHECK(f[i] == doctest::Approx(0.7));
            CHECK(f[16 + i] == doctest::Approx(0.3));
            CHECK(f[32 + i] == doctest::Approx(0.9));
        }
    }

    SUBCASE("R == W is the identity where weights are positive") {
        Rng rng(183);
        UvImage tex;
        tex.channels = 3;
        tex.resolution = 4;
        tex.data.resize(48);
        tex.weight.assign(16, 1.0);
        for (double& v : tex.data) v = rng.uniform(0, 1);
        std::vector<double> f = image_features(tex, 4);
        CHECK(max_abs_diff(f, tex.data) < 1e-15);
    }

    SUBCASE("weighted pooling matches a direct oracle") {
        Rng rng(187);
        UvImage tex;
        tex.channels = 3;
        tex.resolution = 8;
        tex.data.resize(3 * 64);
        tex.weight.resize(64);
        for (double& v : tex.data) v = rng.uniform(0, 1);
        for (double& w : tex.weight) w = rng.bounded(3) == 0 ? 0.0 : rng.uniform(0.2, 2.0);

        std::vector<double> f = image_features(tex, 4);
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i)
                for (int c = 0; c < 3; ++c) {
                    double num = 0, den = 0;
                    for (int bj = 0; bj < 2; ++bj)
                        for (int bi = 0; bi < 2; ++bi) {
                            int x = 2 * i + bi, y = 2 * j + bj;
                            double w = tex.weight[y * 8 + x];
                            num += w * tex.at(c, x, y);
                            den += w;
                        }
                    double expect = den > 0 ? num / den : 0.0;
                    CHECK(f[c * 16 + j * 4 + i] == doctest::Approx(expect).epsilon(1e-12));
                }
    }

    SUBCASE("indivisible resolutions raise") {
        UvImage tex;
        tex.channels = 3;
        tex.resolution = 6;
        tex.data.assign(3 * 36, 0.0);
        tex.weight.assign(36, 1.0);
        CHECK_THROWS_AS(image_features(tex, 4), Error);
    }
}

TEST_CASE("view_features") {
    TemplateMesh mesh = unit_quad();
    Skeleton sk = single_joint_skeleton();
    PosedMesh posed = pose_mesh(sk, Pose::identity(1), mesh);
    TexelGrid grid = build_texel_grid(mesh, 4);

    auto camera_at = [&](Vec3 eye) {
        Camera cam;
        Vec3 target{0.5, 0.5, 0.0};
        Vec3 fwd = normalized(target - eye);
        Vec3 up_hint = std::abs(fwd.y) > 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        Vec3 right = normalized(cross(fwd, up_hint));
        cam.rotation = Mat3::from_columns(right, cross(fwd, right), fwd).transposed();
        cam.translation = -(cam.rotation * eye);
        cam.fx = cam.fy = 20;
        cam.cx = cam.cy = 8;
        cam.width = cam.height = 16;
        return cam;
    };

    SUBCASE("camera along the normal gives v_t = 1 over the whole quad") {
        // Both triangles share the +z normal; aim straight down at the centroid
        // of each in turn and check its texels.
        Camera cam = camera_at({0.5, 0.5, 4.0});
        std::vector<double> f = view_features(cam, posed, mesh, grid);
        // Texels of triangles whose centroid sits directly under the camera
        // approach 1; all are close for a distant camera.
        for (int texel : grid.valid_texels) CHECK(f[texel] > 0.99);
    }

    SUBCASE("camera in the triangle plane gives v_t = 0") {
        Camera cam;
        cam.rotation = Mat3::identity();
        cam.translation = -(Mat3::identity() * Vec3{3.0, 0.5, 0.0});
        cam.fx = cam.fy = 20;
        cam.cx = cam.cy = 8;
        cam.width = cam.height = 16;
        std::vector<double> f = view_features(cam, posed, mesh, grid);
        for (int texel : grid.valid_texels) CHECK(std::abs(f[texel]) < 1e-12);
    }

    SUBCASE("joint rigid transforms leave v_t unchanged") {
        Rng rng(191);
        Camera cam = camera_at({1.2, -0.4, 3.0});
        std::vector<double> base = view_features(cam, posed, mesh, grid);
        for (int trial = 0; trial < 20; ++trial) {
            Quat gq = Quat::from_axis_angle({rng.gaussian(), rng.gaussian(), rng.gaussian()},
                                            rng.uniform(-2.5, 2.5));
            Mat3 G = gq.to_matrix();
            Vec3 gt{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};

            PosedMesh moved = posed;
            for (Vec3& v : moved.vertices) v = G * v + gt;
            for (Vec3& n : moved.triangle_normals) n = G * n;
            for (Mat3& f2 : moved.triangle_tangent_frames) f2 = G * f2;
            Camera cam2 = cam;
            cam2.rotation = cam.rotation * G.transposed();
            cam2.translation = cam.translation - cam2.rotation * gt;

            std::vector<double> out = view_features(cam2, moved, mesh, grid);
            CHECK(max_abs_diff(out, base) < 1e-9);
        }
    }
}

namespace {

struct DecodeFixture {
    StripFixture strip;
    DecoderParams params;
    FeatureMaps features;

    explicit DecodeFixture(uint64_t seed, double weight_scale = 0.4) {
        Rng rng(seed);
        PoseProjection proj = PoseProjection::random_orthonormal(6, 2, rng);
        params = DecoderParams::init(proj.c_out, 3, 3, 4,
                                     static_cast<int>(strip.grid.valid_texels.size()), 0.05, seed,
                                     weight_scale, 0.1);
        params.pose_projection = proj;

        features.resolution = 4;
        features.pose_channels = params.c_pose;
        features.image_channels = 3;
        features.pose.resize(static_cast<size_t>(params.c_pose) * 16);
        features.image.resize(3 * 16);
        features.view.resize(16);
        for (double& v : features.pose) v = rng.uniform(-1, 1);
        for (double& v : features.image) v = rng.uniform(0, 1);
        for (double& v : features.view) v = rng.uniform(-1, 1);
    }
};

}  // namespace

TEST_CASE("decode zero params") {
    DecodeFixture fx(211, 0.0);
    std::fill(fx.params.params.begin(), fx.params.params.end(), 0.0);
    DecodeResult out = decode(fx.features, fx.params, fx.strip.grid);
    for (const Correctives& c : out.correctives) {
        CHECK(norm(c.delta_position) == 0.0);
        CHECK(norm(c.delta_rotation) == 0.0);
        CHECK(norm(c.delta_scale) == 0.0);
    }
    for (double v : out.alpha) CHECK(v == doctest::Approx(softplus(0.0)).epsilon(1e-15));
    for (double v : out.rgb) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("view features feed appearance only") {
    DecodeFixture fx(223);
    DecodeResult base = decode(fx.features, fx.params, fx.strip.grid);

    FeatureMaps perturbed = fx.features;
    for (double& v : perturbed.view) v += 0.37;
    DecodeResult out = decode(perturbed, fx.params, fx.strip.grid);

    CHECK(std::memcmp(base.alpha.data(), out.alpha.data(),
                      base.alpha.size() * sizeof(double)) == 0);
    for (size_t k = 0; k < base.correctives.size(); ++k) {
        CHECK(norm(base.correctives[k].delta_position - out.correctives[k].delta_position) == 0.0);
        CHECK(norm(base.correctives[k].delta_rotation - out.correctives[k].delta_rotation) == 0.0);
        CHECK(norm(base.correctives[k].delta_scale - out.correctives[k].delta_scale) == 0.0);
    }
    CHECK(max_abs_diff(base.rgb, out.rgb) > 1e-6);  // appearance must move

    // The adjoint agrees: motion/opacity upstream gradients produce no view
    // feature gradient.
    std::vector<Correctives> d_corr(base.correctives.size(),
                                    Correctives{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
    std::vector<double> d_alpha(base.alpha.size(), 1.0);
    DecodeGrads g = decode_backward(fx.features, fx.params, fx.strip.grid, base, d_corr, {},
                                    d_alpha);
    for (double v : g.features.view) CHECK(v == 0.0);
}

TEST_CASE("decode matches a per-texel affine oracle") {
    DecodeFixture fx(227);
    DecodeResult out = decode(fx.features, fx.params, fx.strip.grid);
    const DecoderParams& p = fx.params;
    const int cm = p.cm(), ca = p.ca();
    const size_t vox = p.vox();

    Rng pick(229);
    for (int rep = 0; rep < 40; ++rep) {
        int k = static_cast<int>(pick.bounded(fx.strip.grid.valid_texels.size()));
        int texel = fx.strip.grid.valid_texels[k];
        std::vector<double> fin(ca);
        for (int c = 0; c < p.c_pose; ++c) fin[c] = fx.features.pose[c * 16 + texel];
        for (int c = 0; c < 3; ++c) fin[p.c_pose + c] = fx.features.image[c * 16 + texel];
        fin[cm] = fx.features.view[texel];

        size_t v = pick.bounded(vox);
        double acc = p.params[p.opacity_b() + k * vox + v];
        for (int c = 0; c < cm; ++c) acc += p.params[p.opacity_w() + v * cm + c] * fin[c];
        CHECK(out.alpha[k * vox + v] == doctest::Approx(softplus(acc)).epsilon(1e-12));

        size_t v3 = pick.bounded(3 * vox);
        acc = p.params[p.appearance_b() + k * 3 * vox + v3];
        for (int c = 0; c < ca; ++c) acc += p.params[p.appearance_w() + v3 * ca + c] * fin[c];
        CHECK(out.rgb[k * 3 * vox + v3] == doctest::Approx(sigmoid(acc)).epsilon(1e-12));

        double m = p.params[p.motion_b() + k * 9 + 0];
        for (int c = 0; c < cm; ++c) m += p.params[p.motion_w() + 0 * cm + c] * fin[c];
        CHECK(out.correctives[k].delta_position.x ==
              doctest::Approx(m * p.motion_scale).epsilon(1e-12));
    }
}

TEST_CASE("decode_backward matches finite differences") {
    DecodeFixture fx(233);
    const DecoderParams& p = fx.params;
    DecodeResult base = decode(fx.features, fx.params, fx.strip.grid);

    // Random upstream gradients.
    Rng rng(239);
    std::vector<Correctives> d_corr(base.correctives.size());
    for (Correctives& c : d_corr) {
        c.delta_position = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        c.delta_rotation = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        c.delta_scale = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    }
    std::vector<double> d_rgb(base.rgb.size()), d_alpha(base.alpha.size());
    for (double& v : d_rgb) v = rng.uniform(-1, 1);
    for (double& v : d_alpha) v = rng.uniform(-1, 1);

    auto loss_of = [&](const DecoderParams& pp) {
        DecodeResult out = decode(fx.features, pp, fx.strip.grid);
        double acc = 0;
        for (size_t i = 0; i < out.rgb.size(); ++i) acc += d_rgb[i] * out.rgb[i];
        for (size_t i = 0; i < out.alpha.size(); ++i) acc += d_alpha[i] * out.alpha[i];
        for (size_t k = 0; k < out.correctives.size(); ++k) {
            acc += dot(d_corr[k].delta_position, out.correctives[k].delta_position);
            acc += dot(d_corr[k].delta_rotation, out.correctives[k].delta_rotation);
            acc += dot(d_corr[k].delta_scale, out.correctives[k].delta_scale);
        }
        return acc;
    };

    DecodeGrads g = decode_backward(fx.features, fx.params, fx.strip.grid, base, d_corr, d_rgb,
                                    d_alpha);
    const double h = 1e-6;
    Rng pick(241);
    double worst = 0;
    for (int rep = 0; rep < 120; ++rep) {
        size_t idx = pick.bounded(p.params.size());
        DecoderParams pp = fx.params;
        pp.params[idx] += h;
        double lp = loss_of(pp);
        pp.params[idx] -= 2 * h;
        double lm = loss_of(pp);
        double fd = (lp - lm) / (2 * h);
        double denom = std::max({std::abs(fd), std::abs(g.params[idx]), 1e-6});
        worst = std::max(worst, std::abs(fd - g.params[idx]) / denom);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("untied biases are local to their texel") {
    DecodeFixture fx(251);
    DecodeResult base = decode(fx.features, fx.params, fx.strip.grid);
    const DecoderParams& p = fx.params;
    const size_t vox = p.vox();
    const int K = p.texel_count;

    // Upstream gradient only at texel slot 2.
    std::vector<double> d_alpha(base.alpha.size(), 0.0);
    for (size_t v = 0; v < vox; ++v) d_alpha[2 * vox + v] = 1.0;
    DecodeGrads g = decode_backward(fx.features, fx.params, fx.strip.grid, base, {}, {}, d_alpha);
    for (int k = 0; k < K; ++k) {
        double total = 0;
        for (size_t v = 0; v < vox; ++v)
            total += std::abs(g.params[p.opacity_b() + k * vox + v]);
        if (k == 2)
            CHECK(total > 0.0);
        else
            CHECK(total == 0.0);
    }
}
