#pragma once

#include <string>
#include <utility>
#include <vector>

#include "avp/camera.hpp"
#include "avp/features.hpp"
#include "avp/fit.hpp"
#include "avp/image.hpp"
#include "avp/mesh.hpp"
#include "avp/primitives.hpp"

namespace avp {

// --- images ---------------------------------------------------------------

// PFM, little-endian, rows bottom-to-top. 1 or 3 channels.
void write_pfm(const std::string& path, const Image& image);
Image read_pfm(const std::string& path);

// 8-bit PNG preview with gamma 2.2; linear PFM stays the authoritative format.
void write_png(const std::string& path, const Image& image);

// --- meshes and rigs --------------------------------------------------------

void write_obj(const std::string& path, const TemplateMesh& mesh);

// Loads positions/uvs/faces from OBJ and the skeleton + per-position skin
// weights from the JSON sidecar. Vertices are welded on (position, uv) index
// pairs; welded vertices inherit their position's weights.
std::pair<TemplateMesh, Skeleton> load_template(const std::string& obj_path,
                                                const std::string& skeleton_json_path);

void write_skeleton_json(const std::string& path, const Skeleton& skeleton,
                         const TemplateMesh& mesh);

void write_pose_json(const std::string& path, const Pose& pose);
Pose read_pose_json(const std::string& path);

void write_camera_json(const std::string& path, const Camera& camera);
Camera read_camera_json(const std::string& path);

// --- binary parameter formats ----------------------------------------------

// Primitive set: magic "AVPS", int32 {K, S}, then per primitive 9 float32
// (position, rotation as axis-angle, scale) followed by float32 payloads.
void write_primitive_set(const std::string& path, const PrimitiveSet& set);
PrimitiveSet read_primitive_set(const std::string& path);

// Decoder params: magic "AVPD", int32 {C_theta, C_I, S, W, texel_count,
// raw_dim}, float32 params, float32 pose projection. Scalar hypers live in
// the JSON manifest next to the file.
void write_decoder_params(const std::string& path, const DecoderParams& params);
DecoderParams read_decoder_params(const std::string& path);

enum class ParamsKind { PrimitiveSet, Decoder };
ParamsKind peek_params_kind(const std::string& path);

// --- misc -------------------------------------------------------------------

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

FitConfig read_fit_config_json(const std::string& path);
void write_fit_config_json(const std::string& path, const FitConfig& config);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace avp
