#pragma once

#include <optional>
#include <vector>

#include "avp/camera.hpp"
#include "avp/image.hpp"
#include "avp/mesh.hpp"

namespace avp {

// W x W grid over UV space. Each valid texel stores the triangle whose UV
// footprint contains the texel center plus barycentric coordinates.
struct TexelGrid {
    struct Entry {
        int triangle = -1;
        Vec3 barycentric{0, 0, 0};
    };

    int resolution = 0;  // W
    std::vector<Entry> entries;      // W*W, row-major (v major, u minor)
    std::vector<bool> valid_mask;    // true iff entry present
    std::vector<int> valid_texels;   // indices of valid texels, ascending

    int texel_count() const { return resolution * resolution; }
    bool valid(int texel) const { return valid_mask[texel]; }
    Vec2 texel_center(int texel) const {
        int i = texel % resolution, j = texel / resolution;
        return {(i + 0.5) / resolution, (j + 0.5) / resolution};
    }
};

// Multi-view texture in UV space plus per-texel accumulation weights.
struct UvImage {
    int channels = 0;
    int resolution = 0;
    std::vector<double> data;    // channels * res * res, channel-major planes
    std::vector<double> weight;  // res * res

    double& at(int c, int x, int y) {
        return data[(static_cast<size_t>(c) * resolution + y) * resolution + x];
    }
    double at(int c, int x, int y) const {
        return data[(static_cast<size_t>(c) * resolution + y) * resolution + x];
    }
};

// Maps texel centers (u,v) = ((i+0.5)/W, (j+0.5)/W) to containing triangles.
// Ties on shared UV edges go to the lowest triangle index. Triangles with
// degenerate UV footprints are skipped.
TexelGrid build_texel_grid(const TemplateMesh& mesh, int resolution);

// Barycentric interpolation of the posed owning triangle.
Vec3 texel_surface_point(const TexelGrid& grid, const TemplateMesh& mesh, const PosedMesh& posed,
                         int texel);

// Depth + triangle-id maps of the posed mesh rasterized into a camera.
struct DepthMap {
    int width = 0, height = 0;
    std::vector<double> depth;  // +inf where empty
    std::vector<int> triangle;  // -1 where empty

    double depth_at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
    int tri_at(int x, int y) const { return triangle[static_cast<size_t>(y) * width + x]; }
};

DepthMap rasterize_depth(const PosedMesh& posed, const TemplateMesh& mesh, const Camera& camera);

struct UnwrapConfig {
    double depth_tolerance_scale = 1e-3;  // tau_d = scale * scene diagonal
    int depth_supersample = 4;            // depth raster resolution multiplier
};

// Back-projects each view onto the surface and averages in UV space. A texel
// accumulates a view's sample iff its surface point passes the depth test and
// faces the camera; the weight map counts contributing views.
UvImage unwrap_views(const PosedMesh& posed, const TemplateMesh& mesh,
                     const std::vector<Camera>& cameras, const std::vector<Image>& images,
                     int resolution, const UnwrapConfig& config = {});

// Per-view unwrap accumulators; summing a subset of views and dividing by the
// summed weights reproduces unwrap_views over that subset.
struct UnwrapAccumulator {
    int channels = 0;
    int resolution = 0;
    std::vector<double> color_sum;  // channels * res * res
    std::vector<double> weight;     // res * res
};

UnwrapAccumulator unwrap_single_view(const PosedMesh& posed, const TemplateMesh& mesh,
                                     const Camera& camera, const Image& image, int resolution,
                                     const TexelGrid& grid, const UnwrapConfig& config = {});

// Each valid texel takes its owning triangle's value; invalid texels take 0.
std::vector<double> warp_to_uv(const std::vector<double>& per_triangle_values,
                               const TexelGrid& grid);

}  // namespace avp
