#include "avp/oracle.hpp"

#include <cmath>

namespace avp {

namespace {

// All helpers below are deliberately written from scratch; keep this file
// free of raymarch/uv_atlas includes so the cross-check stays meaningful.

struct OracleBounds {
    double lo[3], hi[3];
};

OracleBounds sphere_union_bounds(const PrimitiveSet& set) {
    OracleBounds b{{0, 0, 0}, {0, 0, 0}};
    if (set.count == 0) {
        for (int i = 0; i < 3; ++i) {
            b.lo[i] = -1e-6;
            b.hi[i] = 1e-6;
        }
        return b;
    }
    for (int i = 0; i < 3; ++i) {
        b.lo[i] = std::numeric_limits<double>::infinity();
        b.hi[i] = -std::numeric_limits<double>::infinity();
    }
    for (int k = 0; k < set.count; ++k) {
        const Vec3& s = set.scale[k];
        double r = std::sqrt(s.x * s.x + s.y * s.y + s.z * s.z);
        for (int i = 0; i < 3; ++i) {
            b.lo[i] = std::min(b.lo[i], set.position[k][i] - r);
            b.hi[i] = std::max(b.hi[i], set.position[k][i] + r);
        }
    }
    for (int i = 0; i < 3; ++i) {
        double pad = 0.01 * (b.hi[i] - b.lo[i]);
        b.lo[i] -= pad;
        b.hi[i] += pad;
    }
    return b;
}

bool bounds_range(const OracleBounds& b, const Vec3& o, const Vec3& d, double& t0, double& t1) {
    t0 = 0.0;
    t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        double oi = o[i], di = d[i];
        if (std::abs(di) < 1e-15) {
            if (oi < b.lo[i] || oi > b.hi[i]) return false;
            continue;
        }
        double ta = (b.lo[i] - oi) / di;
        double tb = (b.hi[i] - oi) / di;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1) return false;
    }
    return true;
}

// Trilinear lookup with the half-voxel border clamp, written independently of
// the engine's interpolator.
double sample_grid(const double* grid, int S, double lx, double ly, double lz) {
    double g[3] = {(lx + 1.0) * 0.5 * S - 0.5, (ly + 1.0) * 0.5 * S - 0.5,
                   (lz + 1.0) * 0.5 * S - 0.5};
    int i0[3], i1[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        if (g[a] < 0.0) g[a] = 0.0;
        if (g[a] > S - 1) g[a] = S - 1;
        i0[a] = static_cast<int>(std::floor(g[a]));
        if (i0[a] > S - 2) i0[a] = std::max(S - 2, 0);
        i1[a] = std::min(i0[a] + 1, S - 1);
        f[a] = g[a] - i0[a];
    }
    double acc = 0.0;
    for (int cz = 0; cz < 2; ++cz) {
        int z = cz ? i1[2] : i0[2];
        double wz = cz ? f[2] : 1.0 - f[2];
        for (int cy = 0; cy < 2; ++cy) {
            int y = cy ? i1[1] : i0[1];
            double wy = cy ? f[1] : 1.0 - f[1];
            for (int cx = 0; cx < 2; ++cx) {
                int x = cx ? i1[0] : i0[0];
                double wx = cx ? f[0] : 1.0 - f[0];
                acc += wx * wy * wz * grid[(z * S + y) * S + x];
            }
        }
    }
    return acc;
}

}  // namespace

OracleOutput oracle_render(const PrimitiveSet& set, const Camera& camera, int sample_count,
                           const Vec3& background) {
    camera.validate();
    if (sample_count < 1) throw Error(ErrorKind::Usage, "oracle sample_count must be >= 1");

    const int S = set.payload_res;
    const size_t vox = static_cast<size_t>(S) * S * S;
    OracleBounds bounds = sphere_union_bounds(set);

    OracleOutput out;
    out.rgb = Image(camera.width, camera.height, 3);
    out.alpha = Image(camera.width, camera.height, 1);

    Vec3 origin = camera.center();
    std::vector<int> candidates;
    std::vector<double> radius(set.count);
    for (int k = 0; k < set.count; ++k) radius[k] = norm(set.scale[k]);

    for (int py = 0; py < camera.height; ++py) {
        for (int px = 0; px < camera.width; ++px) {
            Vec3 dir = camera.pixel_direction(px + 0.5, py + 0.5);

            double t0, t1;
            size_t pidx = (static_cast<size_t>(py) * camera.width + px) * 3;
            size_t aidx = static_cast<size_t>(py) * camera.width + px;
            if (!bounds_range(bounds, origin, dir, t0, t1)) {
                for (int c = 0; c < 3; ++c) out.rgb.data[pidx + c] = background[c];
                continue;
            }

            // Conservative per-ray culling by bounding sphere distance.
            candidates.clear();
            for (int k = 0; k < set.count; ++k) {
                Vec3 rel = set.position[k] - origin;
                double along = dot(rel, dir);
                if (along + radius[k] < t0 || along - radius[k] > t1) continue;
                Vec3 perp = rel - dir * along;
                if (norm2(perp) > radius[k] * radius[k]) continue;
                candidates.push_back(k);
            }

            double T = 0.0;
            double rgb[3] = {0, 0, 0};
            if (!candidates.empty()) {
                double h = (t1 - t0) / sample_count;
                for (int i = 0; i < sample_count && T < 1.0; ++i) {
                    double t = t0 + (i + 0.5) * h;
                    Vec3 x = origin + dir * t;
                    double a_sum = 0.0, c_sum[3] = {0, 0, 0};
                    for (int k : candidates) {
                        Vec3 rel = x - set.position[k];
                        const Mat3& R = set.rotation[k];
                        double lx = (R.m[0][0] * rel.x + R.m[1][0] * rel.y + R.m[2][0] * rel.z) /
                                    set.scale[k].x;
                        if (lx < -1.0 || lx > 1.0) continue;
                        double ly = (R.m[0][1] * rel.x + R.m[1][1] * rel.y + R.m[2][1] * rel.z) /
                                    set.scale[k].y;
                        if (ly < -1.0 || ly > 1.0) continue;
                        double lz = (R.m[0][2] * rel.x + R.m[1][2] * rel.y + R.m[2][2] * rel.z) /
                                    set.scale[k].z;
                        if (lz < -1.0 || lz > 1.0) continue;
                        const double* ap = set.alpha.data() + static_cast<size_t>(k) * vox;
                        const double* rp = set.rgb.data() + static_cast<size_t>(k) * 3 * vox;
                        a_sum += sample_grid(ap, S, lx, ly, lz);
                        c_sum[0] += sample_grid(rp, S, lx, ly, lz);
                        c_sum[1] += sample_grid(rp + vox, S, lx, ly, lz);
                        c_sum[2] += sample_grid(rp + 2 * vox, S, lx, ly, lz);
                    }
                    double T_new = std::min(1.0, T + a_sum * h);
                    double w = T_new - T;
                    for (int c = 0; c < 3; ++c) rgb[c] += w * c_sum[c];
                    T = T_new;
                }
            }
            for (int c = 0; c < 3; ++c) out.rgb.data[pidx + c] = rgb[c] + (1.0 - T) * background[c];
            out.alpha.data[aidx] = T;
        }
    }
    return out;
}

}  // namespace avp
