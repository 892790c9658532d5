#include "avp/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace avp {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path, bool binary = true) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) throw Error(ErrorKind::Io, "cannot open for reading: " + path);
    return f;
}

std::ofstream open_out(const std::string& path, bool binary = true) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw Error(ErrorKind::Io, "cannot open for writing: " + path);
    return f;
}

void write_f32(std::ostream& os, const double* data, size_t n) {
    std::vector<float> buf(n);
    for (size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(data[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), n * sizeof(float));
}

void read_f32(std::istream& is, double* data, size_t n, const std::string& path) {
    std::vector<float> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), n * sizeof(float));
    if (!is) throw Error(ErrorKind::Format, "truncated float data in " + path);
    for (size_t i = 0; i < n; ++i) data[i] = buf[i];
}

void write_i32(std::ostream& os, int32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

int32_t read_i32(std::istream& is, const std::string& path) {
    int32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw Error(ErrorKind::Format, "truncated header in " + path);
    return v;
}

json load_json(const std::string& path) {
    std::ifstream f = open_in(path, false);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Format, "malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

void dump_json(const std::string& path, const json& j) {
    std::ofstream f = open_out(path, false);
    f << j.dump(2) << "\n";
}

}  // namespace

// --- images ---------------------------------------------------------------

void write_pfm(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3)
        throw Error(ErrorKind::Usage, "PFM supports 1 or 3 channels");
    std::ofstream f = open_out(path);
    f << (image.channels == 3 ? "PF" : "Pf") << "\n"
      << image.width << " " << image.height << "\n"
      << "-1.0\n";
    std::vector<float> row(static_cast<size_t>(image.width) * image.channels);
    for (int y = image.height - 1; y >= 0; --y) {  // bottom-to-top
        const double* src = image.data.data() + static_cast<size_t>(y) * image.width * image.channels;
        for (size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(src[i]);
        f.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
}

Image read_pfm(const std::string& path) {
    std::ifstream f = open_in(path);
    std::string magic;
    f >> magic;
    int channels;
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        throw Error(ErrorKind::Format, "not a PFM file: " + path);
    int w, h;
    double scale;
    f >> w >> h >> scale;
    if (!f || w <= 0 || h <= 0) throw Error(ErrorKind::Format, "bad PFM header: " + path);
    if (scale >= 0) throw Error(ErrorKind::Format, "big-endian PFM not supported: " + path);
    f.get();  // single whitespace byte after the scale

    Image img(w, h, channels);
    std::vector<float> row(static_cast<size_t>(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
        if (!f) throw Error(ErrorKind::Format, "truncated PFM data: " + path);
        double* dst = img.data.data() + static_cast<size_t>(y) * w * channels;
        for (size_t i = 0; i < row.size(); ++i) dst[i] = row[i];
    }
    return img;
}

// --- PNG --------------------------------------------------------------------

namespace {

uint32_t crc32_table_entry(uint32_t n) {
    for (int k = 0; k < 8; ++k) n = (n & 1) ? 0xedb88320u ^ (n >> 1) : n >> 1;
    return n;
}

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0xffffffffu) {
    static uint32_t table[256];
    static bool init = [] {
        for (uint32_t i = 0; i < 256; ++i) table[i] = crc32_table_entry(i);
        return true;
    }();
    (void)init;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(v >> 24);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

void png_chunk(std::ostream& os, const char* type, const std::vector<uint8_t>& data) {
    std::vector<uint8_t> buf;
    put_u32_be(buf, static_cast<uint32_t>(data.size()));
    buf.insert(buf.end(), type, type + 4);
    buf.insert(buf.end(), data.begin(), data.end());
    uint32_t crc = crc32(buf.data() + 4, buf.size() - 4) ^ 0xffffffffu;
    put_u32_be(buf, crc);
    os.write(reinterpret_cast<const char*>(buf.data()), buf.size());
}

}  // namespace

void write_png(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3)
        throw Error(ErrorKind::Usage, "PNG writer supports 1 or 3 channels");
    std::ofstream f = open_out(path);
    const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, image.width);
    put_u32_be(ihdr, image.height);
    ihdr.push_back(8);                                  // bit depth
    ihdr.push_back(image.channels == 3 ? 2 : 0);        // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    png_chunk(f, "IHDR", ihdr);

    // Raw scanlines, filter 0, gamma 2.2 encoding.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(image.height) * (1 + image.width * image.channels));
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) {
                double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
                raw.push_back(static_cast<uint8_t>(std::lround(255.0 * std::pow(v, 1.0 / 2.2))));
            }
    }

    // zlib stream with stored deflate blocks.
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t pos = 0;
    while (pos < raw.size()) {
        size_t n = std::min<size_t>(65535, raw.size() - pos);
        z.push_back(pos + n >= raw.size() ? 1 : 0);  // BFINAL
        z.push_back(n & 0xff);
        z.push_back((n >> 8) & 0xff);
        z.push_back(~n & 0xff);
        z.push_back((~n >> 8) & 0xff);
        z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + n);
        pos += n;
    }
    uint32_t a = 1, b = 0;
    for (uint8_t byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    put_u32_be(z, (b << 16) | a);
    png_chunk(f, "IDAT", z);
    png_chunk(f, "IEND", {});
}

// --- meshes and rigs --------------------------------------------------------

void write_obj(const std::string& path, const TemplateMesh& mesh) {
    std::ofstream f = open_out(path, false);
    f.precision(17);
    for (const Vec3& v : mesh.vertices) f << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const Vec2& t : mesh.uv) f << "vt " << t.x << " " << t.y << "\n";
    for (const auto& tri : mesh.triangles)
        f << "f " << tri[0] + 1 << "/" << tri[0] + 1 << " " << tri[1] + 1 << "/" << tri[1] + 1
          << " " << tri[2] + 1 << "/" << tri[2] + 1 << "\n";
}

std::pair<TemplateMesh, Skeleton> load_template(const std::string& obj_path,
                                                const std::string& skeleton_json_path) {
    std::ifstream f = open_in(obj_path, false);
    std::vector<Vec3> positions;
    std::vector<Vec2> uvs;
    struct Face {
        int v[3], vt[3];
    };
    std::vector<Face> faces;

    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 p;
            ss >> p.x >> p.y >> p.z;
            positions.push_back(p);
        } else if (tag == "vt") {
            Vec2 t;
            ss >> t.x >> t.y;
            uvs.push_back(t);
        } else if (tag == "f") {
            std::vector<std::pair<int, int>> corners;
            std::string tok;
            while (ss >> tok) {
                size_t slash = tok.find('/');
                int v = std::stoi(tok.substr(0, slash));
                int vt = slash == std::string::npos ? v : std::stoi(tok.substr(slash + 1));
                corners.emplace_back(v - 1, vt - 1);
            }
            if (corners.size() < 3) throw Error(ErrorKind::Format, "face with <3 corners in OBJ");
            for (size_t i = 2; i < corners.size(); ++i) {  // fan-triangulate
                Face face;
                face.v[0] = corners[0].first;
                face.vt[0] = corners[0].second;
                face.v[1] = corners[i - 1].first;
                face.vt[1] = corners[i - 1].second;
                face.v[2] = corners[i].first;
                face.vt[2] = corners[i].second;
                faces.push_back(face);
            }
        }
    }

    json sk = load_json(skeleton_json_path);
    Skeleton skeleton;
    for (const auto& joint : sk.at("joints")) {
        skeleton.parent.push_back(joint.at("parent").get<int>());
        auto rr = joint.at("rest_rotation");
        auto rt = joint.at("rest_translation");
        Rigid r;
        r.q = Quat{rr.at(0), rr.at(1), rr.at(2), rr.at(3)}.normalized();
        r.t = Vec3{rt.at(0), rt.at(1), rt.at(2)};
        skeleton.rest_local.push_back(r);
    }
    skeleton.validate();

    std::vector<std::array<SkinWeight, kMaxSkinInfluences>> pos_weights(
        positions.size(), std::array<SkinWeight, kMaxSkinInfluences>{});
    const auto& weights = sk.at("weights");
    if (weights.size() != positions.size())
        throw Error(ErrorKind::Format, "skin weight count does not match OBJ positions");
    for (size_t v = 0; v < positions.size(); ++v) {
        const auto& entries = weights.at(v);
        if (entries.size() > kMaxSkinInfluences)
            throw Error(ErrorKind::Format, "more than 4 skin influences on a vertex");
        for (size_t i = 0; i < entries.size(); ++i) {
            pos_weights[v][i].joint = entries.at(i).at(0).get<int>();
            pos_weights[v][i].weight = entries.at(i).at(1).get<double>();
        }
    }

    // Weld on (position, uv) pairs.
    TemplateMesh mesh;
    std::map<std::pair<int, int>, int> weld;
    auto corner_index = [&](int v, int vt) {
        auto key = std::make_pair(v, vt);
        auto it = weld.find(key);
        if (it != weld.end()) return it->second;
        if (v < 0 || v >= static_cast<int>(positions.size()) || vt < 0 ||
            vt >= static_cast<int>(uvs.size()))
            throw Error(ErrorKind::Format, "OBJ face index out of range");
        int idx = mesh.vertex_count();
        mesh.vertices.push_back(positions[v]);
        mesh.uv.push_back(uvs[vt]);
        mesh.skin_weights.push_back(pos_weights[v]);
        weld[key] = idx;
        return idx;
    };
    for (const Face& face : faces) {
        std::array<int, 3> tri;
        for (int i = 0; i < 3; ++i) tri[i] = corner_index(face.v[i], face.vt[i]);
        mesh.triangles.push_back(tri);
    }
    mesh.validate(skeleton.joint_count());
    return {mesh, skeleton};
}

void write_skeleton_json(const std::string& path, const Skeleton& skeleton,
                         const TemplateMesh& mesh) {
    json joints = json::array();
    for (int j = 0; j < skeleton.joint_count(); ++j) {
        const Rigid& r = skeleton.rest_local[j];
        joints.push_back({{"parent", skeleton.parent[j]},
                          {"rest_rotation", {r.q.w, r.q.x, r.q.y, r.q.z}},
                          {"rest_translation", {r.t.x, r.t.y, r.t.z}}});
    }
    json weights = json::array();
    for (const auto& vw : mesh.skin_weights) {
        json entry = json::array();
        for (const SkinWeight& sw : vw)
            if (sw.weight > 0.0) entry.push_back({sw.joint, sw.weight});
        weights.push_back(entry);
    }
    dump_json(path, json{{"joints", joints}, {"weights", weights}});
}

void write_pose_json(const std::string& path, const Pose& pose) {
    json rots = json::array();
    for (const Quat& q : pose.joint_rotations) rots.push_back({q.w, q.x, q.y, q.z});
    dump_json(path, json{{"joint_rotations", rots},
                         {"root_translation",
                          {pose.root_translation.x, pose.root_translation.y,
                           pose.root_translation.z}}});
}

Pose read_pose_json(const std::string& path) {
    json j = load_json(path);
    Pose pose;
    for (const auto& q : j.at("joint_rotations"))
        pose.joint_rotations.push_back(Quat{q.at(0), q.at(1), q.at(2), q.at(3)});
    auto t = j.at("root_translation");
    pose.root_translation = Vec3{t.at(0), t.at(1), t.at(2)};
    return pose;
}

void write_camera_json(const std::string& path, const Camera& camera) {
    json rot = json::array();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) rot.push_back(camera.rotation.m[i][j]);
    dump_json(path, json{{"rotation", rot},
                         {"translation",
                          {camera.translation.x, camera.translation.y, camera.translation.z}},
                         {"fx", camera.fx},
                         {"fy", camera.fy},
                         {"cx", camera.cx},
                         {"cy", camera.cy},
                         {"width", camera.width},
                         {"height", camera.height}});
}

Camera read_camera_json(const std::string& path) {
    json j = load_json(path);
    Camera cam;
    const auto& rot = j.at("rotation");
    if (rot.size() != 9) throw Error(ErrorKind::Format, "camera rotation must have 9 entries");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) cam.rotation.m[i][k] = rot.at(i * 3 + k);
    const auto& t = j.at("translation");
    cam.translation = Vec3{t.at(0), t.at(1), t.at(2)};
    cam.fx = j.at("fx");
    cam.fy = j.at("fy");
    cam.cx = j.at("cx");
    cam.cy = j.at("cy");
    cam.width = j.at("width");
    cam.height = j.at("height");
    cam.validate();
    return cam;
}

// --- binary parameter formats ----------------------------------------------

void write_primitive_set(const std::string& path, const PrimitiveSet& set) {
    std::ofstream f = open_out(path);
    f.write("AVPS", 4);
    write_i32(f, set.count);
    write_i32(f, set.payload_res);
    const size_t vox = set.voxels();
    for (int k = 0; k < set.count; ++k) {
        Vec3 aa = so3_log(set.rotation[k]);
        double tr[9] = {set.position[k].x, set.position[k].y, set.position[k].z,
                        aa.x,              aa.y,              aa.z,
                        set.scale[k].x,    set.scale[k].y,    set.scale[k].z};
        write_f32(f, tr, 9);
        write_f32(f, set.rgb_of(k), 3 * vox);
        write_f32(f, set.alpha_of(k), vox);
    }
    json manifest{{"format", "primitive_set"},
                  {"count", set.count},
                  {"payload_res", set.payload_res},
                  {"texel", set.texel}};
    dump_json(path + ".json", manifest);
}

PrimitiveSet read_primitive_set(const std::string& path) {
    std::ifstream f = open_in(path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::strncmp(magic, "AVPS", 4) != 0)
        throw Error(ErrorKind::Format, "not a primitive set file: " + path);
    PrimitiveSet set;
    set.count = read_i32(f, path);
    set.payload_res = read_i32(f, path);
    if (set.count < 0 || set.payload_res <= 0)
        throw Error(ErrorKind::Format, "bad primitive set header: " + path);
    const size_t vox = set.voxels();
    set.position.resize(set.count);
    set.rotation.resize(set.count);
    set.scale.resize(set.count);
    set.rgb.resize(static_cast<size_t>(set.count) * 3 * vox);
    set.alpha.resize(static_cast<size_t>(set.count) * vox);
    for (int k = 0; k < set.count; ++k) {
        double tr[9];
        read_f32(f, tr, 9, path);
        set.position[k] = Vec3{tr[0], tr[1], tr[2]};
        set.rotation[k] = so3_exp(Vec3{tr[3], tr[4], tr[5]});
        set.scale[k] = Vec3{tr[6], tr[7], tr[8]};
        read_f32(f, set.rgb_of(k), 3 * vox, path);
        read_f32(f, set.alpha_of(k), vox, path);
    }
    std::ifstream mf(path + ".json");
    if (mf) {
        json manifest;
        mf >> manifest;
        if (manifest.contains("texel")) set.texel = manifest["texel"].get<std::vector<int>>();
    }
    return set;
}

void write_decoder_params(const std::string& path, const DecoderParams& params) {
    std::ofstream f = open_out(path);
    f.write("AVPD", 4);
    write_i32(f, params.c_pose);
    write_i32(f, params.c_image);
    write_i32(f, params.payload_res);
    write_i32(f, params.resolution);
    write_i32(f, params.texel_count);
    write_i32(f, params.pose_projection.raw_dim);
    write_f32(f, params.params.data(), params.params.size());
    write_f32(f, params.pose_projection.weights.data(), params.pose_projection.weights.size());
    json manifest{{"format", "decoder"},
                  {"C_theta", params.c_pose},
                  {"C_I", params.c_image},
                  {"S", params.payload_res},
                  {"W", params.resolution},
                  {"texel_count", params.texel_count},
                  {"pose_raw_dim", params.pose_projection.raw_dim},
                  {"motion_scale", params.motion_scale},
                  {"rotation_limit", params.rotation_limit},
                  {"weight_gain", params.weight_gain}};
    dump_json(path + ".json", manifest);
}

DecoderParams read_decoder_params(const std::string& path) {
    std::ifstream f = open_in(path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::strncmp(magic, "AVPD", 4) != 0)
        throw Error(ErrorKind::Format, "not a decoder params file: " + path);
    DecoderParams p;
    p.c_pose = read_i32(f, path);
    p.c_image = read_i32(f, path);
    p.payload_res = read_i32(f, path);
    p.resolution = read_i32(f, path);
    p.texel_count = read_i32(f, path);
    p.pose_projection.raw_dim = read_i32(f, path);
    p.pose_projection.c_out = p.c_pose;
    p.params.resize(p.total());
    read_f32(f, p.params.data(), p.params.size(), path);
    p.pose_projection.weights.resize(static_cast<size_t>(p.c_pose) * p.pose_projection.raw_dim);
    read_f32(f, p.pose_projection.weights.data(), p.pose_projection.weights.size(), path);

    json manifest = load_json(path + ".json");
    p.motion_scale = manifest.at("motion_scale").get<double>();
    p.rotation_limit = manifest.value("rotation_limit", M_PI - 1e-6);
    p.weight_gain = manifest.value("weight_gain", 1.0);
    return p;
}

ParamsKind peek_params_kind(const std::string& path) {
    std::ifstream f = open_in(path);
    char magic[4];
    f.read(magic, 4);
    if (!f) throw Error(ErrorKind::Format, "cannot read magic from " + path);
    if (std::strncmp(magic, "AVPS", 4) == 0) return ParamsKind::PrimitiveSet;
    if (std::strncmp(magic, "AVPD", 4) == 0) return ParamsKind::Decoder;
    throw Error(ErrorKind::Format, "unknown params format in " + path);
}

// --- misc -------------------------------------------------------------------

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream f = open_out(path, false);
    f << "iteration,loss_rgb,loss_mask,loss_vol,loss_ms,total,psnr_holdout,wall_ms\n";
    f.precision(17);
    for (const MetricsRow& r : rows) {
        f << r.iteration << "," << r.terms.rgb << "," << r.terms.mask << "," << r.terms.vol << ","
          << r.terms.ms << "," << r.terms.total << ",";
        if (std::isnan(r.psnr_holdout))
            f << "";
        else
            f << r.psnr_holdout;
        f << "," << r.wall_ms << "\n";
    }
}

FitConfig read_fit_config_json(const std::string& path) {
    json j = load_json(path);
    FitConfig c;
    c.iterations = j.value("iterations", c.iterations);
    c.dense_phase_iterations = j.value("dense_phase_iterations", c.dense_phase_iterations);
    c.sparse_view_count = j.value("sparse_view_count", c.sparse_view_count);
    c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
    c.seed = j.value("seed", c.seed);
    c.loss_weights.lambda_rgb = j.value("lambda_rgb", c.loss_weights.lambda_rgb);
    c.loss_weights.lambda_m = j.value("lambda_m", c.loss_weights.lambda_m);
    c.loss_weights.lambda_vol = j.value("lambda_vol", c.loss_weights.lambda_vol);
    c.loss_weights.lambda_ms = j.value("lambda_ms", c.loss_weights.lambda_ms);
    c.render_config.step_size = j.value("step_size", c.render_config.step_size);
    c.step_scale = j.value("step_scale", c.step_scale);
    if (j.contains("holdout_views")) c.holdout_views = j["holdout_views"].get<std::vector<int>>();
    c.eval_every = j.value("eval_every", c.eval_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.pose_feature_channels = j.value("pose_feature_channels", c.pose_feature_channels);
    c.motion_scale = j.value("motion_scale", c.motion_scale);
    c.weight_init_scale = j.value("weight_init_scale", c.weight_init_scale);
    c.opacity_bias_init = j.value("opacity_bias_init", c.opacity_bias_init);
    c.decoder_weight_gain = j.value("decoder_weight_gain", c.decoder_weight_gain);
    return c;
}

void write_fit_config_json(const std::string& path, const FitConfig& c) {
    json j{{"iterations", c.iterations},
           {"dense_phase_iterations", c.dense_phase_iterations},
           {"sparse_view_count", c.sparse_view_count},
           {"learning_rate", c.adam.learning_rate},
           {"beta1", c.adam.beta1},
           {"beta2", c.adam.beta2},
           {"epsilon", c.adam.epsilon},
           {"seed", c.seed},
           {"lambda_rgb", c.loss_weights.lambda_rgb},
           {"lambda_m", c.loss_weights.lambda_m},
           {"lambda_vol", c.loss_weights.lambda_vol},
           {"lambda_ms", c.loss_weights.lambda_ms},
           {"step_size", c.render_config.step_size},
           {"step_scale", c.step_scale},
           {"holdout_views", c.holdout_views},
           {"eval_every", c.eval_every},
           {"checkpoint_every", c.checkpoint_every},
           {"pose_feature_channels", c.pose_feature_channels},
           {"motion_scale", c.motion_scale},
           {"weight_init_scale", c.weight_init_scale},
           {"opacity_bias_init", c.opacity_bias_init},
           {"decoder_weight_gain", c.decoder_weight_gain}};
    dump_json(path, j);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f = open_in(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f = open_out(path);
    f << text;
}

}  // namespace avp
