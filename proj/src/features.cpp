#include "avp/features.hpp"

#include <cmath>

namespace avp {

PoseProjection PoseProjection::random_orthonormal(int c_out, int joint_count, Rng& rng) {
    PoseProjection proj;
    proj.raw_dim = 4 * joint_count + 3;
    proj.c_out = std::min(c_out, proj.raw_dim);
    proj.weights.resize(static_cast<size_t>(proj.c_out) * proj.raw_dim);
    // Gram-Schmidt over seeded gaussian rows.
    for (int r = 0; r < proj.c_out; ++r) {
        double* row = proj.weights.data() + static_cast<size_t>(r) * proj.raw_dim;
        for (int c = 0; c < proj.raw_dim; ++c) row[c] = rng.gaussian();
        for (int p = 0; p < r; ++p) {
            const double* prev = proj.weights.data() + static_cast<size_t>(p) * proj.raw_dim;
            double d = 0;
            for (int c = 0; c < proj.raw_dim; ++c) d += row[c] * prev[c];
            for (int c = 0; c < proj.raw_dim; ++c) row[c] -= d * prev[c];
        }
        double n = 0;
        for (int c = 0; c < proj.raw_dim; ++c) n += row[c] * row[c];
        n = std::sqrt(std::max(n, 1e-30));
        for (int c = 0; c < proj.raw_dim; ++c) row[c] /= n;
    }
    return proj;
}

PoseProjection PoseProjection::identity(int joint_count) {
    PoseProjection proj;
    proj.raw_dim = 4 * joint_count + 3;
    proj.c_out = proj.raw_dim;
    proj.weights.assign(static_cast<size_t>(proj.raw_dim) * proj.raw_dim, 0.0);
    for (int i = 0; i < proj.raw_dim; ++i) proj.weights[static_cast<size_t>(i) * proj.raw_dim + i] = 1.0;
    return proj;
}

std::vector<double> pose_features(const Pose& pose, const Skeleton& skeleton,
                                  const TemplateMesh& mesh, const TexelGrid& grid,
                                  const PoseProjection& proj) {
    const int J = skeleton.joint_count();
    const int raw_dim = 4 * J + 3;
    if (proj.raw_dim != raw_dim) throw Error(ErrorKind::Usage, "pose projection raw_dim mismatch");
    int root = 0;
    for (int j = 0; j < J; ++j)
        if (skeleton.parent[j] == kNoParent) root = j;

    const int W = grid.resolution;
    std::vector<double> out(static_cast<size_t>(proj.c_out) * W * W, 0.0);
    std::vector<double> joint_w(J);
    std::vector<double> raw(raw_dim);

    for (int texel : grid.valid_texels) {
        const TexelGrid::Entry& e = grid.entries[texel];
        const auto& tri = mesh.triangles[e.triangle];
        std::fill(joint_w.begin(), joint_w.end(), 0.0);
        for (int v = 0; v < 3; ++v) {
            double b = e.barycentric[v];
            for (const SkinWeight& sw : mesh.skin_weights[tri[v]])
                if (sw.weight > 0.0) joint_w[sw.joint] += b * sw.weight;
        }
        for (int j = 0; j < J; ++j) {
            const Quat& q = pose.joint_rotations[j];
            raw[4 * j + 0] = joint_w[j] * q.w;
            raw[4 * j + 1] = joint_w[j] * q.x;
            raw[4 * j + 2] = joint_w[j] * q.y;
            raw[4 * j + 3] = joint_w[j] * q.z;
        }
        for (int c = 0; c < 3; ++c) raw[4 * J + c] = joint_w[root] * pose.root_translation[c];

        for (int r = 0; r < proj.c_out; ++r) {
            const double* row = proj.weights.data() + static_cast<size_t>(r) * raw_dim;
            double acc = 0;
            for (int c = 0; c < raw_dim; ++c) acc += row[c] * raw[c];
            out[static_cast<size_t>(r) * W * W + texel] = acc;
        }
    }
    return out;
}

std::vector<double> image_features(const UvImage& texture, int w) {
    if (w <= 0 || texture.resolution < w || texture.resolution % w != 0)
        throw Error(ErrorKind::Usage, "texture resolution must be a positive multiple of W");
    const int R = texture.resolution;
    const int block = R / w;
    const int C = texture.channels;
    std::vector<double> out(static_cast<size_t>(C) * w * w, 0.0);

    for (int j = 0; j < w; ++j) {
        for (int i = 0; i < w; ++i) {
            double wsum = 0.0;
            std::vector<double> csum(C, 0.0);
            for (int bj = 0; bj < block; ++bj) {
                for (int bi = 0; bi < block; ++bi) {
                    int x = i * block + bi, y = j * block + bj;
                    double wt = texture.weight[static_cast<size_t>(y) * R + x];
                    if (wt <= 0.0) continue;
                    wsum += wt;
                    for (int c = 0; c < C; ++c) csum[c] += wt * texture.at(c, x, y);
                }
            }
            if (wsum > 0.0)
                for (int c = 0; c < C; ++c)
                    out[static_cast<size_t>(c) * w * w + j * w + i] = csum[c] / wsum;
        }
    }
    return out;
}

std::vector<double> view_features(const Camera& camera, const PosedMesh& posed,
                                  const TemplateMesh& mesh, const TexelGrid& grid) {
    camera.validate();
    Vec3 center = camera.center();
    std::vector<double> per_tri(mesh.triangle_count(), 0.0);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        Vec3 centroid =
            (posed.vertices[tri[0]] + posed.vertices[tri[1]] + posed.vertices[tri[2]]) / 3.0;
        Vec3 v = center - centroid;
        double n = norm(v);
        per_tri[t] = n > 0.0 ? dot(v / n, posed.triangle_normals[t]) : 0.0;
    }
    return warp_to_uv(per_tri, grid);
}

DecoderParams DecoderParams::init(int c_pose, int c_image, int payload_res, int resolution,
                                  int texel_count, double motion_scale, uint64_t seed,
                                  double weight_scale, double opacity_bias,
                                  double weight_gain) {
    DecoderParams p;
    p.weight_gain = weight_gain;
    p.c_pose = c_pose;
    p.c_image = c_image;
    p.payload_res = payload_res;
    p.resolution = resolution;
    p.texel_count = texel_count;
    p.motion_scale = motion_scale;
    p.params.assign(p.total(), 0.0);

    Rng rng(seed);
    auto fill_gaussian = [&](size_t off, size_t n, double scale) {
        for (size_t i = 0; i < n; ++i) p.params[off + i] = scale * rng.gaussian();
    };
    fill_gaussian(p.motion_w(), 9 * p.cm(), weight_scale / std::sqrt(double(p.cm())));
    fill_gaussian(p.opacity_w(), p.vox() * p.cm(), weight_scale / std::sqrt(double(p.cm())));
    fill_gaussian(p.appearance_w(), 3 * p.vox() * p.ca(), weight_scale / std::sqrt(double(p.ca())));
    for (size_t i = 0; i < static_cast<size_t>(texel_count) * p.vox(); ++i)
        p.params[p.opacity_b() + i] = opacity_bias;
    return p;
}

namespace {

// |dR| < limit via radial clamping; returns the clamped vector and fills the
// 3x3 Jacobian d(clamped)/d(raw) scaled by sigma_m.
Vec3 clamp_rotation(const Vec3& raw, double sigma_m, double limit, Mat3& jac) {
    Vec3 r = raw * sigma_m;
    double n = norm(r);
    if (n <= limit) {
        jac = Mat3::identity() * sigma_m;
        return r;
    }
    Vec3 u = r / n;
    // d/dr [limit * r / |r|] = (limit/|r|) (I - u u^T)
    Mat3 proj = Mat3::identity();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) proj.m[i][j] = ((i == j) ? 1.0 : 0.0) - u[i] * u[j];
    jac = proj * (limit / n * sigma_m);
    return u * limit;
}

}  // namespace

DecodeResult decode(const FeatureMaps& features, const DecoderParams& params,
                    const TexelGrid& grid) {
    if (features.pose_channels != params.c_pose || features.image_channels != params.c_image)
        throw Error(ErrorKind::Usage, "feature channel counts do not match decoder");
    if (features.resolution != params.resolution)
        throw Error(ErrorKind::Usage, "feature resolution does not match decoder");
    if (static_cast<int>(grid.valid_texels.size()) != params.texel_count)
        throw Error(ErrorKind::Usage, "texel count does not match decoder");

    const int K = params.texel_count;
    const size_t vox = params.vox();
    const int cm = params.cm(), ca = params.ca();
    const int wsq = params.resolution * params.resolution;

    DecodeResult out;
    out.correctives.resize(K);
    out.rgb.resize(static_cast<size_t>(K) * 3 * vox);
    out.alpha.resize(static_cast<size_t>(K) * vox);

    const double* mw = params.params.data() + params.motion_w();
    const double* mb = params.params.data() + params.motion_b();
    const double* ow = params.params.data() + params.opacity_w();
    const double* ob = params.params.data() + params.opacity_b();
    const double* aw = params.params.data() + params.appearance_w();
    const double* ab = params.params.data() + params.appearance_b();

    std::vector<double> fin(ca);
    for (int k = 0; k < K; ++k) {
        int texel = grid.valid_texels[k];
        for (int c = 0; c < params.c_pose; ++c)
            fin[c] = features.pose[static_cast<size_t>(c) * wsq + texel];
        for (int c = 0; c < params.c_image; ++c)
            fin[params.c_pose + c] = features.image[static_cast<size_t>(c) * wsq + texel];
        fin[cm] = features.view[texel];

        const double gain = params.weight_gain;
        double motion[9];
        for (int r = 0; r < 9; ++r) {
            double acc = mb[static_cast<size_t>(k) * 9 + r];
            const double* row = mw + static_cast<size_t>(r) * cm;
            for (int c = 0; c < cm; ++c) acc += gain * row[c] * fin[c];
            motion[r] = acc;
        }
        Correctives& corr = out.correctives[k];
        corr.delta_position = Vec3{motion[0], motion[1], motion[2]} * params.motion_scale;
        Mat3 jac_unused;
        corr.delta_rotation = clamp_rotation(Vec3{motion[3], motion[4], motion[5]},
                                             params.motion_scale, params.rotation_limit,
                                             jac_unused);
        corr.delta_scale = Vec3{motion[6], motion[7], motion[8]} * params.motion_scale;

        double* alpha_k = out.alpha.data() + static_cast<size_t>(k) * vox;
        const double* ob_k = ob + static_cast<size_t>(k) * vox;
        for (size_t v = 0; v < vox; ++v) {
            double acc = ob_k[v];
            const double* row = ow + v * cm;
            for (int c = 0; c < cm; ++c) acc += gain * row[c] * fin[c];
            alpha_k[v] = softplus(acc);
        }

        double* rgb_k = out.rgb.data() + static_cast<size_t>(k) * 3 * vox;
        const double* ab_k = ab + static_cast<size_t>(k) * 3 * vox;
        for (size_t v = 0; v < 3 * vox; ++v) {
            double acc = ab_k[v];
            const double* row = aw + v * ca;
            for (int c = 0; c < ca; ++c) acc += gain * row[c] * fin[c];
            rgb_k[v] = sigmoid(acc);
        }
    }
    return out;
}

std::vector<double> decode_appearance(const FeatureMaps& features, const DecoderParams& params,
                                      const TexelGrid& grid) {
    if (static_cast<int>(grid.valid_texels.size()) != params.texel_count)
        throw Error(ErrorKind::Usage, "texel count does not match decoder");
    const int K = params.texel_count;
    const size_t vox = params.vox();
    const int cm = params.cm(), ca = params.ca();
    const int wsq = params.resolution * params.resolution;

    std::vector<double> rgb(static_cast<size_t>(K) * 3 * vox);
    const double* aw = params.params.data() + params.appearance_w();
    const double* ab = params.params.data() + params.appearance_b();

    std::vector<double> fin(ca);
    for (int k = 0; k < K; ++k) {
        int texel = grid.valid_texels[k];
        for (int c = 0; c < params.c_pose; ++c)
            fin[c] = features.pose[static_cast<size_t>(c) * wsq + texel];
        for (int c = 0; c < params.c_image; ++c)
            fin[params.c_pose + c] = features.image[static_cast<size_t>(c) * wsq + texel];
        fin[cm] = features.view[texel];

        double* rgb_k = rgb.data() + static_cast<size_t>(k) * 3 * vox;
        const double* ab_k = ab + static_cast<size_t>(k) * 3 * vox;
        for (size_t v = 0; v < 3 * vox; ++v) {
            double acc = ab_k[v];
            const double* row = aw + v * ca;
            for (int c = 0; c < ca; ++c) acc += params.weight_gain * row[c] * fin[c];
            rgb_k[v] = sigmoid(acc);
        }
    }
    return rgb;
}

DecodeGrads decode_backward(const FeatureMaps& features, const DecoderParams& params,
                            const TexelGrid& grid, const DecodeResult& result,
                            const std::vector<Correctives>& d_correctives,
                            const std::vector<double>& d_rgb, const std::vector<double>& d_alpha) {
    const int K = params.texel_count;
    const size_t vox = params.vox();
    const int cm = params.cm(), ca = params.ca();
    const int wsq = params.resolution * params.resolution;

    DecodeGrads g;
    g.params.assign(params.params.size(), 0.0);
    g.features.resolution = params.resolution;
    g.features.pose_channels = params.c_pose;
    g.features.image_channels = params.c_image;
    g.features.pose.assign(static_cast<size_t>(params.c_pose) * wsq, 0.0);
    g.features.image.assign(static_cast<size_t>(params.c_image) * wsq, 0.0);
    g.features.view.assign(static_cast<size_t>(wsq), 0.0);

    const double* mw = params.params.data() + params.motion_w();
    const double* mb = params.params.data() + params.motion_b();
    const double* ow = params.params.data() + params.opacity_w();
    const double* aw = params.params.data() + params.appearance_w();

    double* g_mw = g.params.data() + params.motion_w();
    double* g_mb = g.params.data() + params.motion_b();
    double* g_ow = g.params.data() + params.opacity_w();
    double* g_ob = g.params.data() + params.opacity_b();
    double* g_aw = g.params.data() + params.appearance_w();
    double* g_ab = g.params.data() + params.appearance_b();

    std::vector<double> fin(ca), dfin(ca);
    for (int k = 0; k < K; ++k) {
        int texel = grid.valid_texels[k];
        for (int c = 0; c < params.c_pose; ++c)
            fin[c] = features.pose[static_cast<size_t>(c) * wsq + texel];
        for (int c = 0; c < params.c_image; ++c)
            fin[params.c_pose + c] = features.image[static_cast<size_t>(c) * wsq + texel];
        fin[cm] = features.view[texel];
        std::fill(dfin.begin(), dfin.end(), 0.0);

        // Motion branch: recompute the raw rotation channel to re-derive the
        // clamp Jacobian.
        if (!d_correctives.empty()) {
            double rot_raw[3];
            for (int r = 3; r < 6; ++r) {
                double acc = mb[static_cast<size_t>(k) * 9 + r];
                const double* row = mw + static_cast<size_t>(r) * cm;
                for (int c = 0; c < cm; ++c) acc += params.weight_gain * row[c] * fin[c];
                rot_raw[r - 3] = acc;
            }
            Mat3 rot_jac;
            clamp_rotation(Vec3{rot_raw[0], rot_raw[1], rot_raw[2]}, params.motion_scale,
                           params.rotation_limit, rot_jac);

            const Correctives& dc = d_correctives[k];
            double d_motion[9];
            for (int i = 0; i < 3; ++i) d_motion[i] = dc.delta_position[i] * params.motion_scale;
            Vec3 d_rot = rot_jac.t_mul(dc.delta_rotation);
            for (int i = 0; i < 3; ++i) d_motion[3 + i] = d_rot[i];
            for (int i = 0; i < 3; ++i) d_motion[6 + i] = dc.delta_scale[i] * params.motion_scale;

            for (int r = 0; r < 9; ++r) {
                double gm = d_motion[r];
                if (gm == 0.0) continue;
                g_mb[static_cast<size_t>(k) * 9 + r] += gm;
                double* wrow = g_mw + static_cast<size_t>(r) * cm;
                const double* row = mw + static_cast<size_t>(r) * cm;
                for (int c = 0; c < cm; ++c) {
                    wrow[c] += params.weight_gain * gm * fin[c];
                    dfin[c] += params.weight_gain * gm * row[c];
                }
            }
        }

        if (!d_alpha.empty()) {
            const double* y = result.alpha.data() + static_cast<size_t>(k) * vox;
            const double* dy = d_alpha.data() + static_cast<size_t>(k) * vox;
            double* gb = g_ob + static_cast<size_t>(k) * vox;
            for (size_t v = 0; v < vox; ++v) {
                if (dy[v] == 0.0) continue;
                // softplus'(x) = 1 - exp(-y)
                double gpre = dy[v] * (1.0 - std::exp(-y[v]));
                gb[v] += gpre;
                double* wrow = g_ow + v * cm;
                const double* row = ow + v * cm;
                for (int c = 0; c < cm; ++c) {
                    wrow[c] += params.weight_gain * gpre * fin[c];
                    dfin[c] += params.weight_gain * gpre * row[c];
                }
            }
        }

        if (!d_rgb.empty()) {
            const double* y = result.rgb.data() + static_cast<size_t>(k) * 3 * vox;
            const double* dy = d_rgb.data() + static_cast<size_t>(k) * 3 * vox;
            double* gb = g_ab + static_cast<size_t>(k) * 3 * vox;
            for (size_t v = 0; v < 3 * vox; ++v) {
                if (dy[v] == 0.0) continue;
                double gpre = dy[v] * y[v] * (1.0 - y[v]);
                gb[v] += gpre;
                double* wrow = g_aw + v * ca;
                const double* row = aw + v * ca;
                for (int c = 0; c < ca; ++c) {
                    wrow[c] += params.weight_gain * gpre * fin[c];
                    dfin[c] += params.weight_gain * gpre * row[c];
                }
            }
        }

        for (int c = 0; c < params.c_pose; ++c)
            g.features.pose[static_cast<size_t>(c) * wsq + texel] += dfin[c];
        for (int c = 0; c < params.c_image; ++c)
            g.features.image[static_cast<size_t>(c) * wsq + texel] += dfin[params.c_pose + c];
        g.features.view[texel] += dfin[cm];
    }
    return g;
}

}  // namespace avp
