#include "avp/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "avp/io.hpp"
#include "json.hpp"

namespace avp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::array<SkinWeight, kMaxSkinInfluences> single_weight(int joint) {
    std::array<SkinWeight, kMaxSkinInfluences> w{};
    w[0] = {joint, 1.0};
    return w;
}

Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up_hint, double focal,
                      int width, int height) {
    Vec3 fwd = normalized(target - eye);  // camera +z
    Vec3 right = normalized(cross(fwd, up_hint));
    Vec3 up = cross(fwd, right);  // camera +y (image y grows downward)
    Camera cam;
    cam.rotation = Mat3::from_columns(right, up, fwd).transposed();  // world -> camera
    cam.translation = -(cam.rotation * eye);
    cam.fx = cam.fy = focal;
    cam.cx = width * 0.5;
    cam.cy = height * 0.5;
    cam.width = width;
    cam.height = height;
    return cam;
}

SyntheticScene make_quad(uint64_t seed) {
    SyntheticScene scene;
    scene.preset = "quad";
    scene.seed = seed;
    scene.texel_resolution = 8;
    scene.tangential_window = true;
    scene.payload_res = 8;
    scene.unwrap_resolution = 64;
    scene.thickness_factor = 1.0;
    scene.alpha_max = 8.0;
    scene.oracle_samples = 1024;

    // Subdivided unit quad in the xy-plane, UV = (x, y).
    const int n = 5;
    TemplateMesh& mesh = scene.mesh;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            double u = static_cast<double>(i) / (n - 1);
            double v = static_cast<double>(j) / (n - 1);
            mesh.vertices.push_back({u, v, 0.0});
            mesh.uv.push_back({u, v});
            mesh.skin_weights.push_back(single_weight(0));
        }
    }
    for (int j = 0; j + 1 < n; ++j) {
        for (int i = 0; i + 1 < n; ++i) {
            int a = j * n + i, b = j * n + i + 1, c = (j + 1) * n + i + 1, d = (j + 1) * n + i;
            mesh.triangles.push_back({a, b, c});  // CCW, normal +z
            mesh.triangles.push_back({a, c, d});
        }
    }

    scene.skeleton.parent = {kNoParent};
    scene.skeleton.rest_local = {Rigid::identity()};

    scene.poses.push_back(Pose::identity(1));
    {
        Pose p = Pose::identity(1);
        p.joint_rotations[0] = Quat::from_axis_angle({0, 0, 1}, 0.15);
        p.root_translation = {0.02, -0.01, 0.03};
        scene.poses.push_back(p);
    }
    {
        Pose p = Pose::identity(1);
        p.joint_rotations[0] = Quat::from_axis_angle({0, 1, 0}, -0.2);
        scene.poses.push_back(p);
    }

    // Cameras on a spherical cap on the +z side, looking at the quad center.
    Rng rng(seed);
    Vec3 target{0.5, 0.5, 0.0};
    for (int i = 0; i < 8; ++i) {
        double az = 2.0 * M_PI * i / 8.0;
        double tilt = 0.55 + 0.1 * rng.uniform();  // polar angle from +z
        Vec3 eye = target + Vec3{std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az),
                                 std::cos(tilt)} *
                                2.2;
        scene.cameras.push_back(look_at_camera(eye, target, {0, 1, 0}, 80.0, 64, 64));
    }
    return scene;
}

SyntheticScene make_limb(uint64_t seed) {
    SyntheticScene scene;
    scene.preset = "limb";
    scene.seed = seed;
    scene.texel_resolution = 8;
    scene.payload_res = 6;
    scene.unwrap_resolution = 128;
    scene.thickness_factor = 1.0;
    scene.alpha_max = 4.5;
    scene.oracle_samples = 1024;

    // Tube around a two-bone chain along +x; u wraps the circumference
    // (seam vertices duplicated), v runs along the length. The thick shell
    // and dense payload make the limb read as solid.
    const int nx = 13, nu = 13;  // rings, ring vertices (first/last coincide)
    const double length = 0.6, radius = 0.11;
    TemplateMesh& mesh = scene.mesh;
    for (int ix = 0; ix < nx; ++ix) {
        double v = static_cast<double>(ix) / (nx - 1);
        double x = v * length;
        // Taper toward the ends.
        double ends = std::min(v, 1.0 - v);
        double r = radius * (0.3 + 0.7 * std::min(1.0, ends / 0.15));
        for (int iu = 0; iu < nu; ++iu) {
            double u = static_cast<double>(iu) / (nu - 1);
            double ang = 2.0 * M_PI * u;
            mesh.vertices.push_back({x, r * std::cos(ang), r * std::sin(ang)});
            mesh.uv.push_back({u, v});
            // Blend weights across the joint boundary.
            double w1 = std::clamp((x - 0.27) / 0.06, 0.0, 1.0);
            w1 = w1 * w1 * (3 - 2 * w1);  // smoothstep
            std::array<SkinWeight, kMaxSkinInfluences> w{};
            w[0] = {0, 1.0 - w1};
            w[1] = {1, w1};
            mesh.skin_weights.push_back(w);
        }
    }
    for (int ix = 0; ix + 1 < nx; ++ix) {
        for (int iu = 0; iu + 1 < nu; ++iu) {
            int a = ix * nu + iu, b = ix * nu + iu + 1;
            int c = (ix + 1) * nu + iu + 1, d = (ix + 1) * nu + iu;
            // Wound so geometric normals point outward.
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }

    scene.skeleton.parent = {kNoParent, 0};
    scene.skeleton.rest_local = {Rigid::identity(),
                                 Rigid{Quat::identity(), Vec3{0.3, 0.0, 0.0}}};

    // Five frames bending the elbow up to 60 degrees while the root swings,
    // so every texel sees baseline diversity across the sequence.
    for (int f = 0; f < 5; ++f) {
        Pose p = Pose::identity(2);
        p.joint_rotations[1] = Quat::from_axis_angle({0, 0, 1}, f * (M_PI / 3.0) / 4.0);
        double swing = (f - 2) * 0.15;
        p.joint_rotations[0] = Quat::from_axis_angle({0, 1, 0.3}, swing);
        p.root_translation = Vec3{0.01 * (f - 2), 0.008 * (f - 2), -0.012 * (f - 2)};
        scene.poses.push_back(p);
    }

    // Ring of 8 with alternating elevations so the vertical structure is
    // triangulated too.
    Rng rng(seed);
    Vec3 target{0.32, 0.1, 0.0};
    for (int i = 0; i < 8; ++i) {
        double az = 2.0 * M_PI * i / 8.0 + 0.1;
        double el = (i % 2 == 0 ? 0.28 : -0.28) + 0.08 * (rng.uniform() - 0.5);
        Vec3 dir{std::sin(az) * std::cos(el), std::sin(el), std::cos(az) * std::cos(el)};
        scene.cameras.push_back(look_at_camera(target + dir * 1.15, target, {0, 1, 0}, 95.0, 64, 64));
    }
    return scene;
}

}  // namespace

std::vector<std::string> scene_presets() { return {"quad", "limb"}; }

SyntheticScene make_scene(const std::string& preset, uint64_t seed) {
    if (preset == "quad") return make_quad(seed);
    if (preset == "limb") return make_limb(seed);
    std::string all;
    for (const std::string& p : scene_presets()) all += (all.empty() ? "" : ", ") + p;
    throw Error(ErrorKind::Usage, "unknown preset '" + preset + "' (available: " + all + ")");
}

void gt_payloads(const SyntheticScene& scene, const TexelGrid& grid, std::vector<double>& rgb,
                 std::vector<double>& alpha) {
    const int S = scene.payload_res;
    const size_t vox = static_cast<size_t>(S) * S * S;
    const size_t K = grid.valid_texels.size();
    const int W = grid.resolution;
    rgb.assign(K * 3 * vox, 0.0);
    alpha.assign(K * vox, 0.0);

    // The fields are smooth global functions of UV sampled at each voxel's own
    // effective UV position (tangent axes map to +-1/(2W) around the texel
    // center), so adjacent primitives agree along shared faces and the shell
    // has no tangential gaps. Opacity is windowed along the normal axis only,
    // reaching zero at the outermost voxel centers.
    const double inset = S > 1 ? 1.0 - 1.0 / S : 1.0;
    auto z_window = [&](double l) {
        double ln = l / inset;
        return std::max(0.0, 1.0 - ln * ln);
    };

    Rng rng(scene.seed * 1315423911ULL + 7);
    double phase_a = rng.uniform(0, 2 * M_PI);
    double phase_r = rng.uniform(0, 2 * M_PI);

    for (size_t k = 0; k < K; ++k) {
        Vec2 uv = grid.texel_center(grid.valid_texels[k]);
        double* rk = rgb.data() + k * 3 * vox;
        double* ak = alpha.data() + k * vox;
        for (int z = 0; z < S; ++z) {
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    Vec3 l{(x + 0.5) / S * 2 - 1, (y + 0.5) / S * 2 - 1, (z + 0.5) / S * 2 - 1};
                    double u = uv.x + l.x / (2.0 * W);
                    double v = uv.y + l.y / (2.0 * W);
                    size_t idx = (static_cast<size_t>(z) * S + y) * S + x;
                    double swirl =
                        0.8 + 0.2 * std::sin(2 * M_PI * (u + 0.75 * v) + phase_a + 0.6 * l.z);
                    double window = z_window(l.z);
                    if (scene.tangential_window) window *= z_window(l.x) * z_window(l.y);
                    ak[idx] = scene.alpha_max * window * swirl;
                    rk[idx] = 0.5 + 0.38 * std::sin(2 * M_PI * (1.5 * u) + phase_r);
                    rk[vox + idx] =
                        0.5 + 0.38 * std::sin(2 * M_PI * (1.25 * v) + 1.3 * phase_r);
                    rk[2 * vox + idx] =
                        0.5 + 0.38 * std::cos(2 * M_PI * (u + v) + 0.6 * phase_r);
                }
            }
        }
    }
}

PrimitiveSet gt_primitive_set(const SyntheticScene& scene, const TexelGrid& grid, int frame) {
    PosedMesh posed = pose_mesh(scene.skeleton, scene.poses.at(frame), scene.mesh);
    std::vector<PrimitiveBasis> basis =
        init_basis(scene.mesh, posed, grid, BasisConfig{scene.thickness_factor});
    std::vector<Correctives> zero(basis.size());
    PrimitiveSet set = apply_correctives(basis, zero, grid.valid_texels, scene.payload_res);
    gt_payloads(scene, grid, set.rgb, set.alpha);
    return set;
}

void gen_scene(const SyntheticScene& scene, const std::string& out_dir) {
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/poses");
    fs::create_directories(out_dir + "/cameras");
    fs::create_directories(out_dir + "/gt");
    fs::create_directories(out_dir + "/targets");
    fs::create_directories(out_dir + "/masks");

    write_obj(out_dir + "/mesh.obj", scene.mesh);
    write_skeleton_json(out_dir + "/skeleton.json", scene.skeleton, scene.mesh);

    char buf[64];
    for (int f = 0; f < scene.frame_count(); ++f) {
        std::snprintf(buf, sizeof(buf), "/poses/frame_%04d.json", f);
        write_pose_json(out_dir + buf, scene.poses[f]);
    }
    for (int c = 0; c < scene.view_count(); ++c) {
        std::snprintf(buf, sizeof(buf), "/cameras/cam_%02d.json", c);
        write_camera_json(out_dir + buf, scene.cameras[c]);
    }

    TexelGrid grid = build_texel_grid(scene.mesh, scene.texel_resolution);
    PrimitiveSet gt0 = gt_primitive_set(scene, grid, 0);
    write_primitive_set(out_dir + "/gt/params.bin", gt0);

    for (int f = 0; f < scene.frame_count(); ++f) {
        PrimitiveSet set = gt_primitive_set(scene, grid, f);
        for (int c = 0; c < scene.view_count(); ++c) {
            OracleOutput oracle =
                oracle_render(set, scene.cameras[c], scene.oracle_samples, scene.background);
            Image mask(oracle.alpha.width, oracle.alpha.height, 1);
            for (size_t i = 0; i < mask.data.size(); ++i)
                mask.data[i] = oracle.alpha.data[i] >= 0.5 ? 1.0 : 0.0;

            std::snprintf(buf, sizeof(buf), "/targets/f%04d_c%02d.pfm", f, c);
            write_pfm(out_dir + buf, oracle.rgb);
            std::snprintf(buf, sizeof(buf), "/targets/f%04d_c%02d.png", f, c);
            write_png(out_dir + buf, oracle.rgb);
            std::snprintf(buf, sizeof(buf), "/masks/f%04d_c%02d.pfm", f, c);
            write_pfm(out_dir + buf, mask);
        }
    }

    json manifest{{"name", scene.preset + "_" + std::to_string(scene.seed)},
                  {"preset", scene.preset},
                  {"seed", scene.seed},
                  {"frames", scene.frame_count()},
                  {"views", scene.view_count()},
                  {"texel_resolution", scene.texel_resolution},
                  {"payload_res", scene.payload_res},
                  {"unwrap_resolution", scene.unwrap_resolution},
                  {"thickness_factor", scene.thickness_factor},
                  {"alpha_max", scene.alpha_max},
                  {"tangential_window", scene.tangential_window},
                  {"oracle_samples", scene.oracle_samples},
                  {"background", {scene.background.x, scene.background.y, scene.background.z}}};
    write_text_file(out_dir + "/scene.json", manifest.dump(2) + "\n");
}

LoadedScene load_scene(const std::string& dir) {
    json manifest;
    {
        std::string text = read_text_file(dir + "/scene.json");
        manifest = json::parse(text);
    }

    LoadedScene out;
    SyntheticScene& scene = out.scene;
    scene.preset = manifest.at("preset").get<std::string>();
    scene.seed = manifest.at("seed").get<uint64_t>();
    scene.texel_resolution = manifest.at("texel_resolution").get<int>();
    scene.payload_res = manifest.at("payload_res").get<int>();
    scene.unwrap_resolution = manifest.at("unwrap_resolution").get<int>();
    scene.thickness_factor = manifest.at("thickness_factor").get<double>();
    scene.alpha_max = manifest.value("alpha_max", 8.0);
    scene.tangential_window = manifest.value("tangential_window", false);
    scene.oracle_samples = manifest.value("oracle_samples", 1024);
    const auto& bg = manifest.at("background");
    scene.background = Vec3{bg.at(0), bg.at(1), bg.at(2)};

    auto [mesh, skeleton] = load_template(dir + "/mesh.obj", dir + "/skeleton.json");
    scene.mesh = mesh;
    scene.skeleton = skeleton;

    const int F = manifest.at("frames").get<int>();
    const int V = manifest.at("views").get<int>();
    char buf[64];
    for (int f = 0; f < F; ++f) {
        std::snprintf(buf, sizeof(buf), "/poses/frame_%04d.json", f);
        scene.poses.push_back(read_pose_json(dir + buf));
    }
    for (int c = 0; c < V; ++c) {
        std::snprintf(buf, sizeof(buf), "/cameras/cam_%02d.json", c);
        scene.cameras.push_back(read_camera_json(dir + buf));
    }

    FitDataset& data = out.dataset;
    data.skeleton = scene.skeleton;
    data.mesh = scene.mesh;
    data.poses = scene.poses;
    data.cameras = scene.cameras;
    data.texel_resolution = scene.texel_resolution;
    data.payload_res = scene.payload_res;
    data.thickness_factor = scene.thickness_factor;
    data.unwrap_resolution = scene.unwrap_resolution;
    data.targets.resize(F);
    data.silhouettes.resize(F);
    for (int f = 0; f < F; ++f) {
        for (int c = 0; c < V; ++c) {
            std::snprintf(buf, sizeof(buf), "/targets/f%04d_c%02d.pfm", f, c);
            data.targets[f].push_back(read_pfm(dir + buf));
            std::snprintf(buf, sizeof(buf), "/masks/f%04d_c%02d.pfm", f, c);
            data.silhouettes[f].push_back(read_pfm(dir + buf));
        }
    }
    out.gt_params_path = dir + "/gt/params.bin";
    return out;
}

}  // namespace avp
