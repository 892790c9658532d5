#pragma once

#include <string>
#include <vector>

#include "avp/fit.hpp"
#include "avp/oracle.hpp"

namespace avp {

// Procedural scene: template + skeleton, pose sequence, camera ring, and an
// analytic per-texel payload generator used as ground truth.
struct SyntheticScene {
    std::string preset;
    uint64_t seed = 0;
    Skeleton skeleton;
    TemplateMesh mesh;
    std::vector<Pose> poses;
    std::vector<Camera> cameras;
    int texel_resolution = 8;    // W
    int payload_res = 8;         // S
    int unwrap_resolution = 64;  // R
    double thickness_factor = 1.0;
    double alpha_max = 8.0;
    // Window opacity along the tangent axes too (C1 box faces, used by the
    // quad verification scene); the limb keeps a tangential-continuous shell.
    bool tangential_window = false;
    Vec3 background{0, 0, 0};
    int oracle_samples = 1024;

    int frame_count() const { return static_cast<int>(poses.size()); }
    int view_count() const { return static_cast<int>(cameras.size()); }
};

std::vector<std::string> scene_presets();

// Deterministic scene for a preset; throws Usage with the preset list on an
// unknown name.
SyntheticScene make_scene(const std::string& preset, uint64_t seed);

// Ground-truth payloads: smooth procedural color and opacity per valid texel,
// windowed to vanish at the outermost voxel centers.
void gt_payloads(const SyntheticScene& scene, const TexelGrid& grid, std::vector<double>& rgb,
                 std::vector<double>& alpha);

// Ground-truth primitive set for one frame: articulation-driven basis, zero
// correctives, gt payloads.
PrimitiveSet gt_primitive_set(const SyntheticScene& scene, const TexelGrid& grid, int frame);

// Writes the on-disk dataset: mesh, skeleton, poses, cameras, gt params, and
// oracle-rendered targets + silhouettes for every (frame, camera).
void gen_scene(const SyntheticScene& scene, const std::string& out_dir);

// Loads a generated dataset back into memory.
struct LoadedScene {
    SyntheticScene scene;
    FitDataset dataset;
    std::string gt_params_path;
};

LoadedScene load_scene(const std::string& dir);

}  // namespace avp
