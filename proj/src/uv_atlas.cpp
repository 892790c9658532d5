#include "avp/uv_atlas.hpp"

#include <algorithm>
#include <cmath>

namespace avp {

TexelGrid build_texel_grid(const TemplateMesh& mesh, int resolution) {
    if (resolution <= 0) throw Error(ErrorKind::Usage, "texel grid resolution must be positive");

    TexelGrid grid;
    grid.resolution = resolution;
    grid.entries.resize(static_cast<size_t>(resolution) * resolution);
    grid.valid_mask.assign(static_cast<size_t>(resolution) * resolution, false);

    const double inv_w = 1.0 / resolution;
    // Ascending triangle order plus first-claim-wins gives the lowest-index
    // tie break on shared UV edges.
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        Vec2 a = mesh.uv[tri[0]], b = mesh.uv[tri[1]], c = mesh.uv[tri[2]];
        double area2 = cross2(b - a, c - a);
        if (std::abs(area2) < 1e-14) continue;  // degenerate UV footprint

        double ulo = std::min({a.x, b.x, c.x}), uhi = std::max({a.x, b.x, c.x});
        double vlo = std::min({a.y, b.y, c.y}), vhi = std::max({a.y, b.y, c.y});
        int i0 = std::max(0, static_cast<int>(std::floor(ulo * resolution - 0.5)));
        int i1 = std::min(resolution - 1, static_cast<int>(std::ceil(uhi * resolution - 0.5)));
        int j0 = std::max(0, static_cast<int>(std::floor(vlo * resolution - 0.5)));
        int j1 = std::min(resolution - 1, static_cast<int>(std::ceil(vhi * resolution - 0.5)));

        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                int texel = j * resolution + i;
                if (grid.valid_mask[texel]) continue;
                Vec2 p{(i + 0.5) * inv_w, (j + 0.5) * inv_w};
                double w0 = cross2(b - p, c - p) / area2;
                double w1 = cross2(c - p, a - p) / area2;
                double w2 = cross2(a - p, b - p) / area2;
                const double eps = 1e-12;
                if (w0 < -eps || w1 < -eps || w2 < -eps) continue;
                // Clamp and renormalize so the stored coordinates are a convex
                // combination even for points on an edge.
                w0 = std::max(w0, 0.0);
                w1 = std::max(w1, 0.0);
                w2 = std::max(w2, 0.0);
                double s = w0 + w1 + w2;
                grid.entries[texel] = {t, Vec3{w0 / s, w1 / s, w2 / s}};
                grid.valid_mask[texel] = true;
            }
        }
    }
    for (int texel = 0; texel < grid.texel_count(); ++texel)
        if (grid.valid_mask[texel]) grid.valid_texels.push_back(texel);
    if (grid.valid_texels.empty()) throw Error(ErrorKind::Domain, "empty atlas");
    return grid;
}

Vec3 texel_surface_point(const TexelGrid& grid, const TemplateMesh& mesh, const PosedMesh& posed,
                         int texel) {
    if (texel < 0 || texel >= grid.texel_count() || !grid.valid(texel))
        throw Error(ErrorKind::Domain, "invalid texel");
    const TexelGrid::Entry& e = grid.entries[texel];
    const auto& tri = mesh.triangles[e.triangle];
    return posed.vertices[tri[0]] * e.barycentric.x + posed.vertices[tri[1]] * e.barycentric.y +
           posed.vertices[tri[2]] * e.barycentric.z;
}

DepthMap rasterize_depth(const PosedMesh& posed, const TemplateMesh& mesh, const Camera& camera) {
    DepthMap map;
    map.width = camera.width;
    map.height = camera.height;
    map.depth.assign(static_cast<size_t>(map.width) * map.height,
                     std::numeric_limits<double>::infinity());
    map.triangle.assign(static_cast<size_t>(map.width) * map.height, -1);

    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        Vec3 cam[3];
        bool behind = false;
        for (int k = 0; k < 3; ++k) {
            cam[k] = camera.to_camera(posed.vertices[tri[k]]);
            if (cam[k].z <= 1e-9) behind = true;
        }
        if (behind) continue;  // no near-plane clipping; synthetic scenes keep geometry in front

        Vec2 scr[3];
        for (int k = 0; k < 3; ++k)
            scr[k] = {camera.fx * cam[k].x / cam[k].z + camera.cx,
                      camera.fy * cam[k].y / cam[k].z + camera.cy};

        double area2 = cross2(scr[1] - scr[0], scr[2] - scr[0]);
        if (std::abs(area2) < 1e-12) continue;

        double xlo = std::min({scr[0].x, scr[1].x, scr[2].x});
        double xhi = std::max({scr[0].x, scr[1].x, scr[2].x});
        double ylo = std::min({scr[0].y, scr[1].y, scr[2].y});
        double yhi = std::max({scr[0].y, scr[1].y, scr[2].y});
        int px0 = std::max(0, static_cast<int>(std::floor(xlo - 0.5)));
        int px1 = std::min(map.width - 1, static_cast<int>(std::ceil(xhi - 0.5)));
        int py0 = std::max(0, static_cast<int>(std::floor(ylo - 0.5)));
        int py1 = std::min(map.height - 1, static_cast<int>(std::ceil(yhi - 0.5)));

        for (int py = py0; py <= py1; ++py) {
            for (int px = px0; px <= px1; ++px) {
                Vec2 p{px + 0.5, py + 0.5};
                double w0 = cross2(scr[1] - p, scr[2] - p) / area2;
                double w1 = cross2(scr[2] - p, scr[0] - p) / area2;
                double w2 = cross2(scr[0] - p, scr[1] - p) / area2;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                // Perspective-correct depth: 1/z interpolates linearly in screen space.
                double inv_z = w0 / cam[0].z + w1 / cam[1].z + w2 / cam[2].z;
                double z = 1.0 / inv_z;
                size_t idx = static_cast<size_t>(py) * map.width + px;
                if (z < map.depth[idx]) {
                    map.depth[idx] = z;
                    map.triangle[idx] = t;
                }
            }
        }
    }
    return map;
}

namespace {

Aabb mesh_bounds(const PosedMesh& posed) {
    Aabb box;
    box.lo = box.hi = posed.vertices.empty() ? Vec3{0, 0, 0} : posed.vertices[0];
    for (const Vec3& v : posed.vertices) box.expand(v);
    return box;
}

}  // namespace

UnwrapAccumulator unwrap_single_view(const PosedMesh& posed, const TemplateMesh& mesh,
                                     const Camera& camera, const Image& image, int resolution,
                                     const TexelGrid& grid, const UnwrapConfig& config) {
    if (image.width != camera.width || image.height != camera.height)
        throw Error(ErrorKind::Format, "image resolution does not match camera");

    UnwrapAccumulator acc;
    acc.channels = image.channels;
    acc.resolution = resolution;
    acc.color_sum.assign(static_cast<size_t>(image.channels) * resolution * resolution, 0.0);
    acc.weight.assign(static_cast<size_t>(resolution) * resolution, 0.0);

    // Depth testing happens on a supersampled raster; at the camera's own
    // resolution the per-pixel depth spread of curved geometry dwarfs tau_d.
    int ss = std::max(1, config.depth_supersample);
    Camera depth_camera = camera;
    depth_camera.fx *= ss;
    depth_camera.fy *= ss;
    depth_camera.cx *= ss;
    depth_camera.cy *= ss;
    depth_camera.width *= ss;
    depth_camera.height *= ss;
    DepthMap depth_map = rasterize_depth(posed, mesh, depth_camera);
    double tau_d = config.depth_tolerance_scale * norm(mesh_bounds(posed).diagonal());
    Vec3 cam_center = camera.center();

    for (int texel : grid.valid_texels) {
        const TexelGrid::Entry& e = grid.entries[texel];
        Vec3 p = texel_surface_point(grid, mesh, posed, texel);

        // Facing test against the owning triangle's geometric normal.
        Vec3 n = posed.triangle_normals[e.triangle];
        Vec3 to_cam = cam_center - p;
        if (dot(to_cam, n) <= 0.0) continue;

        double px, py, z;
        if (!camera.project(p, px, py, z)) continue;
        if (px < 0 || px >= camera.width || py < 0 || py >= camera.height) continue;
        int ix = std::min(static_cast<int>(px * ss), depth_camera.width - 1);
        int iy = std::min(static_cast<int>(py * ss), depth_camera.height - 1);

        // Visible if the rasterizer saw this very triangle here, or the depth
        // matches within tolerance.
        bool visible = depth_map.tri_at(ix, iy) == e.triangle ||
                       z <= depth_map.depth_at(ix, iy) + tau_d;
        if (!visible) continue;

        size_t widx = static_cast<size_t>(texel);
        acc.weight[widx] += 1.0;
        for (int c = 0; c < image.channels; ++c) {
            acc.color_sum[static_cast<size_t>(c) * resolution * resolution + widx] +=
                image.sample_bilinear(px, py, c);
        }
    }
    return acc;
}

UvImage unwrap_views(const PosedMesh& posed, const TemplateMesh& mesh,
                     const std::vector<Camera>& cameras, const std::vector<Image>& images,
                     int resolution, const UnwrapConfig& config) {
    if (cameras.size() != images.size())
        throw Error(ErrorKind::Usage, "camera and image counts differ");
    if (images.empty()) throw Error(ErrorKind::Usage, "unwrap requires at least one view");

    const int channels = images[0].channels;
    TexelGrid grid = build_texel_grid(mesh, resolution);

    UvImage out;
    out.channels = channels;
    out.resolution = resolution;
    out.data.assign(static_cast<size_t>(channels) * resolution * resolution, 0.0);
    out.weight.assign(static_cast<size_t>(resolution) * resolution, 0.0);

    for (size_t v = 0; v < cameras.size(); ++v) {
        if (images[v].channels != channels)
            throw Error(ErrorKind::Format, "all views must share a channel count");
        UnwrapAccumulator acc =
            unwrap_single_view(posed, mesh, cameras[v], images[v], resolution, grid, config);
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += acc.color_sum[i];
        for (size_t i = 0; i < out.weight.size(); ++i) out.weight[i] += acc.weight[i];
    }
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            size_t idx = static_cast<size_t>(y) * resolution + x;
            if (out.weight[idx] > 0.0) {
                for (int c = 0; c < channels; ++c)
                    out.data[static_cast<size_t>(c) * resolution * resolution + idx] /=
                        out.weight[idx];
            }
        }
    }
    return out;
}

std::vector<double> warp_to_uv(const std::vector<double>& per_triangle_values,
                               const TexelGrid& grid) {
    std::vector<double> out(static_cast<size_t>(grid.texel_count()), 0.0);
    for (int texel : grid.valid_texels) {
        int tri = grid.entries[texel].triangle;
        out[texel] = per_triangle_values.at(tri);
    }
    return out;
}

}  // namespace avp
