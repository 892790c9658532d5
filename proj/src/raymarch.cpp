#include "avp/raymarch.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace avp {

namespace {

Aabb primitive_aabb(const PrimitiveSet& set, int k) {
    // |R| * s gives the half-extent of the oriented box per world axis.
    const Mat3& R = set.rotation[k];
    const Vec3& s = set.scale[k];
    Vec3 half;
    for (int i = 0; i < 3; ++i)
        half[i] = std::abs(R.m[i][0]) * s.x + std::abs(R.m[i][1]) * s.y + std::abs(R.m[i][2]) * s.z;
    Aabb box;
    box.lo = set.position[k] - half;
    box.hi = set.position[k] + half;
    return box;
}

// Slab test against the oriented box; boundaries stay in world ray parameters.
bool slab_test(const Ray& ray, const PrimitiveSet& set, int k, HitInterval& hit) {
    const Mat3& R = set.rotation[k];
    const Vec3& s = set.scale[k];
    Vec3 rel = ray.origin - set.position[k];

    double t_lo = ray.t_min, t_hi = ray.t_max;
    int enter_axis = -1, exit_axis = -1;
    double enter_face = 0, exit_face = 0;

    for (int a = 0; a < 3; ++a) {
        Vec3 col = R.col(a);
        double o = dot(col, rel) / s[a];
        double d = dot(col, ray.direction) / s[a];
        if (std::abs(d) < 1e-15) {
            if (o < -1.0 || o > 1.0) return false;
            continue;
        }
        double inv = 1.0 / d;
        double ta = (-1.0 - o) * inv, fa = -1.0;
        double tb = (1.0 - o) * inv, fb = 1.0;
        if (ta > tb) {
            std::swap(ta, tb);
            std::swap(fa, fb);
        }
        if (ta > t_lo) {
            t_lo = ta;
            enter_axis = a;
            enter_face = fa;
        }
        if (tb < t_hi) {
            t_hi = tb;
            exit_axis = a;
            exit_face = fb;
        }
        if (t_lo >= t_hi) return false;
    }
    hit.prim = k;
    hit.t_enter = t_lo;
    hit.t_exit = t_hi;
    hit.enter_axis = enter_axis;
    hit.exit_axis = exit_axis;
    hit.enter_face = enter_face;
    hit.exit_face = exit_face;
    return true;
}

void sort_hits(std::vector<HitInterval>& hits) {
    std::sort(hits.begin(), hits.end(), [](const HitInterval& a, const HitInterval& b) {
        return a.t_enter != b.t_enter ? a.t_enter < b.t_enter : a.prim < b.prim;
    });
}

}  // namespace

Aabb scene_bounds(const PrimitiveSet& set) {
    Aabb box;
    if (set.count == 0) {
        box.lo = Vec3{-1e-6, -1e-6, -1e-6};
        box.hi = Vec3{1e-6, 1e-6, 1e-6};
        return box;
    }
    box.lo = box.hi = set.position[0];
    for (int k = 0; k < set.count; ++k) {
        double r = norm(set.scale[k]);
        Vec3 rv{r, r, r};
        box.expand(set.position[k] - rv);
        box.expand(set.position[k] + rv);
    }
    Vec3 pad = box.diagonal() * 0.01;
    box.lo -= pad;
    box.hi += pad;
    return box;
}

AccelGrid build_accel(const PrimitiveSet& set) {
    AccelGrid grid;
    if (set.count == 0) {
        grid.cell_start.assign(2, 0);
        return grid;
    }

    Aabb bounds = primitive_aabb(set, 0);
    std::vector<Aabb> boxes(set.count);
    double mean_extent = 0;
    for (int k = 0; k < set.count; ++k) {
        boxes[k] = primitive_aabb(set, k);
        bounds.expand(boxes[k].lo);
        bounds.expand(boxes[k].hi);
        mean_extent += norm(boxes[k].diagonal());
    }
    mean_extent /= set.count;
    Vec3 pad = bounds.diagonal() * 1e-4 + Vec3{1e-12, 1e-12, 1e-12};
    bounds.lo -= pad;
    bounds.hi += pad;
    grid.bounds = bounds;

    Vec3 diag = bounds.diagonal();
    double target = std::max(mean_extent, 1e-12);
    auto dims = [&](double extent) {
        return std::clamp(static_cast<int>(std::ceil(extent / target)), 1, 128);
    };
    grid.nx = dims(diag.x);
    grid.ny = dims(diag.y);
    grid.nz = dims(diag.z);
    grid.cell_size = {diag.x / grid.nx, diag.y / grid.ny, diag.z / grid.nz};

    const int ncells = grid.nx * grid.ny * grid.nz;
    std::vector<int> counts(ncells, 0);
    auto cell_range = [&](const Aabb& b, int lo[3], int hi[3]) {
        Vec3 rel_lo = b.lo - bounds.lo, rel_hi = b.hi - bounds.lo;
        int n[3] = {grid.nx, grid.ny, grid.nz};
        for (int i = 0; i < 3; ++i) {
            lo[i] = std::clamp(static_cast<int>(rel_lo[i] / grid.cell_size[i]), 0, n[i] - 1);
            hi[i] = std::clamp(static_cast<int>(rel_hi[i] / grid.cell_size[i]), 0, n[i] - 1);
        }
    };
    for (int k = 0; k < set.count; ++k) {
        int lo[3], hi[3];
        cell_range(boxes[k], lo, hi);
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x)
                    ++counts[(z * grid.ny + y) * grid.nx + x];
    }
    grid.cell_start.assign(ncells + 1, 0);
    for (int i = 0; i < ncells; ++i) grid.cell_start[i + 1] = grid.cell_start[i] + counts[i];
    grid.items.resize(grid.cell_start[ncells]);
    std::vector<int> fill(ncells, 0);
    for (int k = 0; k < set.count; ++k) {
        int lo[3], hi[3];
        cell_range(boxes[k], lo, hi);
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x) {
                    int c = (z * grid.ny + y) * grid.nx + x;
                    grid.items[grid.cell_start[c] + fill[c]++] = k;
                }
    }
    return grid;
}

namespace {

// 3D-DDA walk collecting candidate primitives along the ray range.
void gather_candidates(const Ray& ray, const AccelGrid& grid, std::vector<int>& stamp, int version,
                       std::vector<int>& out) {
    double ta, tb;
    if (!intersect_aabb(ray.origin, ray.direction, grid.bounds, ta, tb)) return;
    ta = std::max(ta, ray.t_min);
    tb = std::min(tb, ray.t_max);
    if (ta > tb) return;

    Vec3 p = ray.origin + ray.direction * ta;
    int n[3] = {grid.nx, grid.ny, grid.nz};
    int cell[3];
    for (int i = 0; i < 3; ++i) {
        cell[i] = std::clamp(static_cast<int>((p[i] - grid.bounds.lo[i]) / grid.cell_size[i]), 0,
                             n[i] - 1);
    }
    int step[3];
    double t_max[3], t_delta[3];
    for (int i = 0; i < 3; ++i) {
        double d = ray.direction[i];
        if (std::abs(d) < 1e-15) {
            step[i] = 0;
            t_max[i] = std::numeric_limits<double>::infinity();
            t_delta[i] = std::numeric_limits<double>::infinity();
        } else if (d > 0) {
            step[i] = 1;
            double edge = grid.bounds.lo[i] + (cell[i] + 1) * grid.cell_size[i];
            t_max[i] = ta + (edge - p[i]) / d;
            t_delta[i] = grid.cell_size[i] / d;
        } else {
            step[i] = -1;
            double edge = grid.bounds.lo[i] + cell[i] * grid.cell_size[i];
            t_max[i] = ta + (edge - p[i]) / d;
            t_delta[i] = -grid.cell_size[i] / d;
        }
    }

    double t = ta;
    while (t <= tb) {
        int c = (cell[2] * grid.ny + cell[1]) * grid.nx + cell[0];
        for (int idx = grid.cell_start[c]; idx < grid.cell_start[c + 1]; ++idx) {
            int k = grid.items[idx];
            if (stamp[k] != version) {
                stamp[k] = version;
                out.push_back(k);
            }
        }
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        t = t_max[axis];
        cell[axis] += step[axis];
        if (cell[axis] < 0 || cell[axis] >= n[axis]) break;
        t_max[axis] += t_delta[axis];
    }
}

}  // namespace

std::vector<HitInterval> intersect_primitives(const Ray& ray, const PrimitiveSet& set,
                                              const AccelGrid* accel) {
    std::vector<HitInterval> hits;
    HitInterval hit;
    if (accel == nullptr) {
        for (int k = 0; k < set.count; ++k)
            if (slab_test(ray, set, k, hit)) hits.push_back(hit);
    } else {
        std::vector<int> stamp(set.count, -1);
        std::vector<int> candidates;
        gather_candidates(ray, *accel, stamp, 0, candidates);
        std::sort(candidates.begin(), candidates.end());
        for (int k : candidates)
            if (slab_test(ray, set, k, hit)) hits.push_back(hit);
    }
    sort_hits(hits);
    return hits;
}

namespace {

// Trilinear interpolation cell for local coordinates in [-1,1]^3 with a
// half-voxel border clamp.
struct TriCell {
    int base = 0;
    int ox = 0, oy = 0, oz = 0;  // +1 strides (0 when S == 1)
    double fx = 0, fy = 0, fz = 0;
    Vec3 dg_dl{0, 0, 0};  // S/2 inside, 0 where clamped
};

inline TriCell make_cell(const Vec3& local, int S) {
    TriCell c;
    double g[3];
    bool clamped[3];
    for (int i = 0; i < 3; ++i) {
        double v = (local[i] + 1.0) * 0.5 * S - 0.5;
        clamped[i] = v <= 0.0 || v >= S - 1;
        g[i] = std::clamp(v, 0.0, static_cast<double>(S - 1));
    }
    int ix = std::min(static_cast<int>(g[0]), std::max(S - 2, 0));
    int iy = std::min(static_cast<int>(g[1]), std::max(S - 2, 0));
    int iz = std::min(static_cast<int>(g[2]), std::max(S - 2, 0));
    c.fx = g[0] - ix;
    c.fy = g[1] - iy;
    c.fz = g[2] - iz;
    c.base = (iz * S + iy) * S + ix;
    c.ox = S > 1 ? 1 : 0;
    c.oy = S > 1 ? S : 0;
    c.oz = S > 1 ? S * S : 0;
    for (int i = 0; i < 3; ++i) c.dg_dl[i] = clamped[i] ? 0.0 : 0.5 * S;
    return c;
}

inline double tri_value(const double* grid, const TriCell& c) {
    double v000 = grid[c.base], v100 = grid[c.base + c.ox];
    double v010 = grid[c.base + c.oy], v110 = grid[c.base + c.oy + c.ox];
    double v001 = grid[c.base + c.oz], v101 = grid[c.base + c.oz + c.ox];
    double v011 = grid[c.base + c.oz + c.oy], v111 = grid[c.base + c.oz + c.oy + c.ox];
    double v00 = v000 + (v100 - v000) * c.fx;
    double v10 = v010 + (v110 - v010) * c.fx;
    double v01 = v001 + (v101 - v001) * c.fx;
    double v11 = v011 + (v111 - v011) * c.fx;
    double v0 = v00 + (v10 - v00) * c.fy;
    double v1 = v01 + (v11 - v01) * c.fy;
    return v0 + (v1 - v0) * c.fz;
}

// Gradient w.r.t. local coordinates (chain through dg_dl).
inline Vec3 tri_grad(const double* grid, const TriCell& c) {
    double v000 = grid[c.base], v100 = grid[c.base + c.ox];
    double v010 = grid[c.base + c.oy], v110 = grid[c.base + c.oy + c.ox];
    double v001 = grid[c.base + c.oz], v101 = grid[c.base + c.oz + c.ox];
    double v011 = grid[c.base + c.oz + c.oy], v111 = grid[c.base + c.oz + c.oy + c.ox];
    double gx = ((v100 - v000) * (1 - c.fy) + (v110 - v010) * c.fy) * (1 - c.fz) +
                ((v101 - v001) * (1 - c.fy) + (v111 - v011) * c.fy) * c.fz;
    double gy = ((v010 - v000) * (1 - c.fx) + (v110 - v100) * c.fx) * (1 - c.fz) +
                ((v011 - v001) * (1 - c.fx) + (v111 - v101) * c.fx) * c.fz;
    double gz = ((v001 - v000) * (1 - c.fx) + (v101 - v100) * c.fx) * (1 - c.fy) +
                ((v011 - v010) * (1 - c.fx) + (v111 - v110) * c.fx) * c.fy;
    return {gx * c.dg_dl.x, gy * c.dg_dl.y, gz * c.dg_dl.z};
}

inline void tri_scatter(double* grad_grid, const TriCell& c, double g) {
    double wx0 = 1 - c.fx, wy0 = 1 - c.fy, wz0 = 1 - c.fz;
    grad_grid[c.base] += g * wx0 * wy0 * wz0;
    grad_grid[c.base + c.ox] += g * c.fx * wy0 * wz0;
    grad_grid[c.base + c.oy] += g * wx0 * c.fy * wz0;
    grad_grid[c.base + c.oy + c.ox] += g * c.fx * c.fy * wz0;
    grad_grid[c.base + c.oz] += g * wx0 * wy0 * c.fz;
    grad_grid[c.base + c.oz + c.ox] += g * c.fx * wy0 * c.fz;
    grad_grid[c.base + c.oz + c.oy] += g * wx0 * c.fy * c.fz;
    grad_grid[c.base + c.oz + c.oy + c.ox] += g * c.fx * c.fy * c.fz;
}

struct SegmentRec {
    double a = 0, b = 0;
    int n = 0;
    int enter_hit = -1, exit_hit = -1;  // hits owning the merged boundaries
    int first_sample = 0;
};

struct SampleRec {
    double t = 0, h = 0;
    int segment = 0;
    double u = 0;       // aggregated alpha * h
    Vec3 c{0, 0, 0};    // aggregated rgb
    double T_after = 0;
};

// Merge sorted hit intervals into disjoint segments, recording which hit owns
// each merged boundary.
void merge_segments(const std::vector<HitInterval>& hits, std::vector<SegmentRec>& segs) {
    segs.clear();
    size_t i = 0;
    while (i < hits.size()) {
        SegmentRec seg;
        seg.a = hits[i].t_enter;
        seg.b = hits[i].t_exit;
        seg.enter_hit = static_cast<int>(i);
        seg.exit_hit = static_cast<int>(i);
        size_t j = i + 1;
        while (j < hits.size() && hits[j].t_enter <= seg.b) {
            if (hits[j].t_exit > seg.b) {
                seg.b = hits[j].t_exit;
                seg.exit_hit = static_cast<int>(j);
            }
            ++j;
        }
        if (seg.b > seg.a) segs.push_back(seg);
        i = j;
    }
}

struct MarchScratch {
    std::vector<HitInterval> hits;
    std::vector<SegmentRec> segs;
    std::vector<SampleRec> samples;
    std::vector<int> stamp;
    std::vector<int> candidates;
    int version = 0;
};

// Forward march over precomputed hits. When `samples` is non-null, fills the
// per-sample trace needed by the adjoint.
MarchResult march_core(const Ray& ray, const PrimitiveSet& set, const RenderConfig& config,
                       const std::vector<HitInterval>& hits, std::vector<SegmentRec>& segs,
                       std::vector<SampleRec>* samples) {
    const int S = set.payload_res;
    const size_t vox = set.voxels();
    merge_segments(hits, segs);
    if (samples) samples->clear();

    double T = 0.0;
    Vec3 rgb{0, 0, 0};
    int total_steps = 0;
    bool saturated = false;

    for (size_t si = 0; si < segs.size() && !saturated; ++si) {
        SegmentRec& seg = segs[si];
        int n = std::max(1, static_cast<int>(std::ceil((seg.b - seg.a) / config.step_size)));
        n = std::min(n, config.max_steps - total_steps);
        if (n <= 0) break;
        seg.n = n;
        seg.first_sample = samples ? static_cast<int>(samples->size()) : 0;
        double h = (seg.b - seg.a) / n;

        for (int i = 0; i < n; ++i) {
            double t = seg.a + (i + 0.5) * h;
            Vec3 x = ray.origin + ray.direction * t;

            double a_sum = 0.0;
            Vec3 c_sum{0, 0, 0};
            for (const HitInterval& hit : hits) {
                if (hit.t_enter > t) break;
                if (t > hit.t_exit) continue;
                Vec3 local = world_to_local(x, set.position[hit.prim], set.rotation[hit.prim],
                                            set.scale[hit.prim]);
                TriCell cell = make_cell(local, S);
                const double* ap = set.alpha.data() + static_cast<size_t>(hit.prim) * vox;
                const double* rp = set.rgb.data() + static_cast<size_t>(hit.prim) * 3 * vox;
                a_sum += tri_value(ap, cell);
                c_sum.x += tri_value(rp, cell);
                c_sum.y += tri_value(rp + vox, cell);
                c_sum.z += tri_value(rp + 2 * vox, cell);
            }
            if (!std::isfinite(a_sum) || !std::isfinite(c_sum.x) || !std::isfinite(c_sum.y) ||
                !std::isfinite(c_sum.z))
                throw Error(ErrorKind::Numeric, "non-finite field");

            double u = a_sum * h;
            double T_new = std::min(1.0, T + u);
            double w = T_new - T;
            rgb += c_sum * w;
            T = T_new;
            ++total_steps;
            if (samples) samples->push_back({t, h, static_cast<int>(si), u, c_sum, T});
            if (T >= 1.0) {
                saturated = true;
                break;
            }
        }
    }
    rgb += config.background * (1.0 - T);
    return {rgb, T};
}

void march_backward_core(const Ray& ray, const PrimitiveSet& set, const RenderConfig& config,
                         const Vec3& grad_rgb, double grad_alpha, MarchScratch& scratch,
                         SceneGrads& grads) {
    const int S = set.payload_res;
    const size_t vox = set.voxels();
    const std::vector<HitInterval>& hits = scratch.hits;
    std::vector<SegmentRec>& segs = scratch.segs;
    std::vector<SampleRec>& samples = scratch.samples;

    march_core(ray, set, config, hits, segs, &samples);
    if (samples.empty()) return;  // only the background contributed; no parameters involved

    const int N = static_cast<int>(samples.size());

    // Reverse sweep through the saturating accumulator. u_bar[i] = dL/du_i.
    std::vector<double> u_bar(N, 0.0);
    double t_bar = 0.0;
    for (int i = N - 1; i >= 0; --i) {
        double direct;
        if (i == N - 1)
            direct = dot(grad_rgb, samples[i].c) + grad_alpha - dot(grad_rgb, config.background);
        else
            direct = dot(grad_rgb, samples[i].c - samples[i + 1].c);
        t_bar += direct;
        double T_prev = i > 0 ? samples[i - 1].T_after : 0.0;
        bool sat = T_prev + samples[i].u >= 1.0;
        if (sat) {
            u_bar[i] = 0.0;
            t_bar = 0.0;
        } else {
            u_bar[i] = t_bar;
        }
    }

    std::vector<double> seg_dA(segs.size(), 0.0), seg_dB(segs.size(), 0.0);

    for (int i = 0; i < N; ++i) {
        const SampleRec& rec = samples[i];
        const SegmentRec& seg = segs[rec.segment];
        double T_prev = i > 0 ? samples[i - 1].T_after : 0.0;
        double w = rec.T_after - T_prev;
        Vec3 dc = grad_rgb * w;
        double a_sum = rec.u / rec.h;
        double da_sum = u_bar[i] * rec.h;
        double dh = u_bar[i] * a_sum;
        bool need_field = da_sum != 0.0 || dc.x != 0.0 || dc.y != 0.0 || dc.z != 0.0;

        double dt_i = 0.0;
        if (need_field) {
            Vec3 x = ray.origin + ray.direction * rec.t;
            for (const HitInterval& hit : hits) {
                if (hit.t_enter > rec.t) break;
                if (rec.t > hit.t_exit) continue;
                int k = hit.prim;
                Vec3 rel = x - set.position[k];
                Vec3 local = world_to_local(x, set.position[k], set.rotation[k], set.scale[k]);
                TriCell cell = make_cell(local, S);
                const double* ap = set.alpha.data() + static_cast<size_t>(k) * vox;
                const double* rp = set.rgb.data() + static_cast<size_t>(k) * 3 * vox;
                double* gap = grads.d_alpha.data() + static_cast<size_t>(k) * vox;
                double* grp = grads.d_rgb.data() + static_cast<size_t>(k) * 3 * vox;

                // Payload scatter.
                tri_scatter(gap, cell, da_sum);
                tri_scatter(grp, cell, dc.x);
                tri_scatter(grp + vox, cell, dc.y);
                tri_scatter(grp + 2 * vox, cell, dc.z);

                // Spatial gradient through the interpolants.
                Vec3 g_loc = tri_grad(ap, cell) * da_sum;
                g_loc += tri_grad(rp, cell) * dc.x;
                g_loc += tri_grad(rp + vox, cell) * dc.y;
                g_loc += tri_grad(rp + 2 * vox, cell) * dc.z;

                // Adjoint of local = diag(1/s) R^T (x - t).
                const Mat3& R = set.rotation[k];
                const Vec3& s = set.scale[k];
                for (int a = 0; a < 3; ++a) {
                    if (g_loc[a] == 0.0) continue;
                    Vec3 col = R.col(a);
                    double common = g_loc[a] / s[a];
                    grads.d_position[k] -= col * common;
                    grads.d_scale[k][a] -= g_loc[a] * local[a] / s[a];
                    grads.d_rotation[k] += cross(col, rel) * common;
                    dt_i += common * dot(col, ray.direction);
                }
            }
        }

        int local_i = i - seg.first_sample;
        double frac = (local_i + 0.5) / seg.n;
        seg_dA[rec.segment] += dt_i * (1.0 - frac) - dh / seg.n;
        seg_dB[rec.segment] += dt_i * frac + dh / seg.n;
    }

    // Boundary adjoints through the slab test: t* = (face - o_a) / d_a with
    // o_a = col.(o - t_k)/s_a and d_a = col.d/s_a.
    auto boundary_adjoint = [&](const HitInterval& hit, int axis, double t_star, double g) {
        if (axis < 0 || g == 0.0) return;
        int k = hit.prim;
        const Mat3& R = set.rotation[k];
        const Vec3& s = set.scale[k];
        Vec3 col = R.col(axis);
        Vec3 rel = ray.origin - set.position[k];
        double d_a = dot(col, ray.direction) / s[axis];
        double o_a = dot(col, rel) / s[axis];
        double g_o = -g / d_a;         // dt*/do_a
        double g_d = -g * t_star / d_a;  // dt*/dd_a
        grads.d_position[k] -= col * (g_o / s[axis]);
        grads.d_scale[k][axis] += g_o * (-o_a / s[axis]) + g_d * (-d_a / s[axis]);
        grads.d_rotation[k] += cross(col, rel) * (g_o / s[axis]);
        grads.d_rotation[k] += cross(col, ray.direction) * (g_d / s[axis]);
    };

    for (size_t si = 0; si < segs.size(); ++si) {
        const SegmentRec& seg = segs[si];
        if (seg.n == 0) continue;
        if (seg_dA[si] != 0.0) {
            const HitInterval& hit = hits[seg.enter_hit];
            boundary_adjoint(hit, hit.enter_axis, hit.t_enter, seg_dA[si]);
        }
        if (seg_dB[si] != 0.0) {
            const HitInterval& hit = hits[seg.exit_hit];
            boundary_adjoint(hit, hit.exit_axis, hit.t_exit, seg_dB[si]);
        }
    }
}

void validate_payload(const PrimitiveSet& set) {
    for (double v : set.alpha)
        if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, "non-finite field");
    for (double v : set.rgb)
        if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, "non-finite field");
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(row_begin, row_end, chunk_index) over disjoint row chunks.
template <typename Fn>
void parallel_rows(int rows, int threads, Fn&& fn) {
    threads = std::min(threads, rows);
    if (threads <= 1) {
        fn(0, rows, 0);
        return;
    }
    std::vector<std::thread> pool;
    int chunk = (rows + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        int begin = t * chunk, end = std::min(rows, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end, t] { fn(begin, end, t); });
    }
    for (auto& th : pool) th.join();
}

void gather_hits(const Ray& ray, const PrimitiveSet& set, const AccelGrid* accel,
                 MarchScratch& scratch) {
    scratch.hits.clear();
    HitInterval hit;
    if (accel == nullptr) {
        for (int k = 0; k < set.count; ++k)
            if (slab_test(ray, set, k, hit)) scratch.hits.push_back(hit);
    } else {
        if (static_cast<int>(scratch.stamp.size()) != set.count)
            scratch.stamp.assign(set.count, -1);
        scratch.candidates.clear();
        ++scratch.version;
        gather_candidates(ray, *accel, scratch.stamp, scratch.version, scratch.candidates);
        std::sort(scratch.candidates.begin(), scratch.candidates.end());
        for (int k : scratch.candidates)
            if (slab_test(ray, set, k, hit)) scratch.hits.push_back(hit);
    }
    sort_hits(scratch.hits);
}

}  // namespace

MarchResult march(const Ray& ray, const PrimitiveSet& set, const RenderConfig& config) {
    config.validate();
    std::vector<HitInterval> hits = intersect_primitives(ray, set, nullptr);
    std::vector<SegmentRec> segs;
    return march_core(ray, set, config, hits, segs, nullptr);
}

void SceneGrads::init(const PrimitiveSet& set) {
    d_position.assign(set.count, Vec3{0, 0, 0});
    d_rotation.assign(set.count, Vec3{0, 0, 0});
    d_scale.assign(set.count, Vec3{0, 0, 0});
    d_rgb.assign(set.rgb.size(), 0.0);
    d_alpha.assign(set.alpha.size(), 0.0);
}

void SceneGrads::add(const SceneGrads& other) {
    for (size_t i = 0; i < d_position.size(); ++i) {
        d_position[i] += other.d_position[i];
        d_rotation[i] += other.d_rotation[i];
        d_scale[i] += other.d_scale[i];
    }
    for (size_t i = 0; i < d_rgb.size(); ++i) d_rgb[i] += other.d_rgb[i];
    for (size_t i = 0; i < d_alpha.size(); ++i) d_alpha[i] += other.d_alpha[i];
}

RenderOutput render(const PrimitiveSet& set, const Camera& camera, const RenderConfig& config) {
    config.validate();
    camera.validate();
    validate_payload(set);

    AccelGrid accel = build_accel(set);
    Aabb bounds = scene_bounds(set);
    std::vector<Ray> rays = generate_rays(camera, bounds);

    RenderOutput out;
    out.width = camera.width;
    out.height = camera.height;
    out.rgb.assign(static_cast<size_t>(camera.width) * camera.height * 3, 0.0);
    out.alpha.assign(static_cast<size_t>(camera.width) * camera.height, 0.0);

    parallel_rows(camera.height, resolve_threads(config.threads), [&](int y0, int y1, int) {
        MarchScratch scratch;
        std::vector<SegmentRec> segs;
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < camera.width; ++x) {
                size_t p = static_cast<size_t>(y) * camera.width + x;
                gather_hits(rays[p], set, &accel, scratch);
                MarchResult r = march_core(rays[p], set, config, scratch.hits, segs, nullptr);
                out.rgb[p * 3 + 0] = r.rgb.x;
                out.rgb[p * 3 + 1] = r.rgb.y;
                out.rgb[p * 3 + 2] = r.rgb.z;
                out.alpha[p] = r.alpha;
            }
        }
    });
    return out;
}

void march_backward(const Ray& ray, const PrimitiveSet& set, const RenderConfig& config,
                    const Vec3& grad_rgb, double grad_alpha, SceneGrads& grads) {
    config.validate();
    MarchScratch scratch;
    scratch.hits = intersect_primitives(ray, set, nullptr);
    march_backward_core(ray, set, config, grad_rgb, grad_alpha, scratch, grads);
}

SceneGrads render_backward(const PrimitiveSet& set, const Camera& camera,
                           const RenderConfig& config, const std::vector<double>& grad_rgb,
                           const std::vector<double>& grad_alpha) {
    config.validate();
    camera.validate();
    validate_payload(set);
    const size_t npix = static_cast<size_t>(camera.width) * camera.height;
    if (grad_rgb.size() != npix * 3)
        throw Error(ErrorKind::Usage, "grad_rgb shape mismatch");
    if (!grad_alpha.empty() && grad_alpha.size() != npix)
        throw Error(ErrorKind::Usage, "grad_alpha shape mismatch");

    AccelGrid accel = build_accel(set);
    Aabb bounds = scene_bounds(set);
    std::vector<Ray> rays = generate_rays(camera, bounds);

    int threads = resolve_threads(config.threads);
    std::vector<SceneGrads> partial(std::max(1, std::min(threads, camera.height)));
    for (auto& g : partial) g.init(set);

    parallel_rows(camera.height, threads, [&](int y0, int y1, int chunk) {
        MarchScratch scratch;
        SceneGrads& grads = partial[chunk];
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < camera.width; ++x) {
                size_t p = static_cast<size_t>(y) * camera.width + x;
                Vec3 g_rgb{grad_rgb[p * 3], grad_rgb[p * 3 + 1], grad_rgb[p * 3 + 2]};
                double g_a = grad_alpha.empty() ? 0.0 : grad_alpha[p];
                if (g_rgb.x == 0 && g_rgb.y == 0 && g_rgb.z == 0 && g_a == 0) continue;
                gather_hits(rays[p], set, &accel, scratch);
                march_backward_core(rays[p], set, config, g_rgb, g_a, scratch, grads);
            }
        }
    });

    // Deterministic reduction in chunk order.
    SceneGrads total = std::move(partial[0]);
    for (size_t i = 1; i < partial.size(); ++i) total.add(partial[i]);
    return total;
}

}  // namespace avp
