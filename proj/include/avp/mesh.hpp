#pragma once

#include <array>
#include <vector>

#include "avp/error.hpp"
#include "avp/math.hpp"

namespace avp {

inline constexpr int kNoParent = -1;
inline constexpr int kMaxSkinInfluences = 4;

// Joint hierarchy in canonical pose. Parents precede children (the root has
// parent kNoParent and there is exactly one root).
struct Skeleton {
    std::vector<int> parent;
    std::vector<Rigid> rest_local;

    int joint_count() const { return static_cast<int>(parent.size()); }
    void validate() const;

    // World transform of every joint in the canonical pose.
    std::vector<Rigid> rest_world() const;
};

// Per-joint unit quaternions plus a world-space root translation. The root
// rotation is applied in world space so that pre-composing a rigid transform
// G maps to (q0 <- g * q0, t <- g_t + g_R * t).
struct Pose {
    std::vector<Quat> joint_rotations;
    Vec3 root_translation;

    static Pose identity(int joint_count);
    void validate(int joint_count) const;
};

struct SkinWeight {
    int joint = 0;
    double weight = 0.0;
};

struct TemplateMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec2> uv;  // per vertex, in [0,1]^2
    std::vector<std::array<SkinWeight, kMaxSkinInfluences>> skin_weights;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
    void validate(int joint_count) const;
};

struct PosedMesh {
    std::vector<Vec3> vertices;
    std::vector<Vec3> triangle_normals;        // unit, geometric
    std::vector<Mat3> triangle_tangent_frames; // columns: tangent, bitangent, normal
};

// Per-joint skinning transforms: world(pose) * world(rest)^-1.
std::vector<Rigid> skinning_transforms(const Skeleton& skeleton, const Pose& pose);

// Linear blend skinning plus per-triangle frames on the posed geometry. The
// tangent follows the UV-u direction within the triangle plane.
PosedMesh pose_mesh(const Skeleton& skeleton, const Pose& pose, const TemplateMesh& mesh);

// True iff all pairwise distances among vertices fully weighted to the subtree
// rooted at `joint` match the canonical pose within tol.
bool rigid_subtree_check(const Skeleton& skeleton, const Pose& pose, const TemplateMesh& mesh,
                         int joint, double tol = 1e-6);

}  // namespace avp
