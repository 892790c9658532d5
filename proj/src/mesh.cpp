#include "avp/mesh.hpp"

#include <cmath>

namespace avp {

void Skeleton::validate() const {
    int roots = 0;
    for (int j = 0; j < joint_count(); ++j) {
        int p = parent[j];
        if (p == kNoParent) {
            ++roots;
        } else if (p < 0 || p >= j) {
            throw Error(ErrorKind::Format, "skeleton joints must be topologically sorted");
        }
    }
    if (roots != 1) throw Error(ErrorKind::Format, "skeleton must have exactly one root");
    if (rest_local.size() != parent.size())
        throw Error(ErrorKind::Format, "skeleton rest_local size mismatch");
}

std::vector<Rigid> Skeleton::rest_world() const {
    std::vector<Rigid> world(joint_count());
    for (int j = 0; j < joint_count(); ++j) {
        world[j] = parent[j] == kNoParent ? rest_local[j] : world[parent[j]].compose(rest_local[j]);
    }
    return world;
}

Pose Pose::identity(int joint_count) {
    Pose p;
    p.joint_rotations.assign(joint_count, Quat::identity());
    p.root_translation = Vec3{0, 0, 0};
    return p;
}

void Pose::validate(int joint_count) const {
    if (static_cast<int>(joint_rotations.size()) != joint_count)
        throw Error(ErrorKind::Format, "pose joint count mismatch");
    for (const Quat& q : joint_rotations) {
        if (std::abs(q.norm() - 1.0) > 1e-9)
            throw Error(ErrorKind::Format, "pose quaternion is not unit norm");
    }
}

void TemplateMesh::validate(int joint_count) const {
    if (uv.size() != vertices.size() || skin_weights.size() != vertices.size())
        throw Error(ErrorKind::Format, "template mesh per-vertex array size mismatch");
    for (const auto& tri : triangles) {
        for (int idx : tri) {
            if (idx < 0 || idx >= vertex_count())
                throw Error(ErrorKind::Format, "triangle index out of range");
        }
    }
    for (const Vec2& t : uv) {
        if (t.x < -1e-9 || t.x > 1 + 1e-9 || t.y < -1e-9 || t.y > 1 + 1e-9)
            throw Error(ErrorKind::Format, "UV coordinate outside [0,1]");
    }
    for (const auto& w : skin_weights) {
        double sum = 0.0;
        for (const SkinWeight& sw : w) {
            if (sw.weight < 0.0) throw Error(ErrorKind::Format, "negative skin weight");
            if (sw.weight > 0.0 && (sw.joint < 0 || sw.joint >= joint_count))
                throw Error(ErrorKind::Format, "skin weight joint out of range");
            sum += sw.weight;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw Error(ErrorKind::Format, "skin weights must sum to 1");
    }
}

std::vector<Rigid> skinning_transforms(const Skeleton& skeleton, const Pose& pose) {
    const int J = skeleton.joint_count();
    std::vector<Rigid> world(J);
    for (int j = 0; j < J; ++j) {
        Rigid local;
        if (skeleton.parent[j] == kNoParent) {
            // Root: world-space rotation and translation around the origin.
            Rigid global{pose.joint_rotations[j], pose.root_translation};
            world[j] = global.compose(skeleton.rest_local[j]);
        } else {
            local = skeleton.rest_local[j].compose(Rigid{pose.joint_rotations[j], Vec3{0, 0, 0}});
            world[j] = world[skeleton.parent[j]].compose(local);
        }
    }
    std::vector<Rigid> rest = skeleton.rest_world();
    std::vector<Rigid> skin(J);
    for (int j = 0; j < J; ++j) skin[j] = world[j].compose(rest[j].inverse());
    return skin;
}

namespace {

// Tangent frame for a posed triangle. dXdu is the UV-u direction of the
// triangle's affine map; it lies in the triangle plane by construction.
Mat3 triangle_frame(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec2& t0, const Vec2& t1,
                    const Vec2& t2, const Vec3& n) {
    Vec3 e1 = p1 - p0, e2 = p2 - p0;
    double du1 = t1.x - t0.x, dv1 = t1.y - t0.y;
    double du2 = t2.x - t0.x, dv2 = t2.y - t0.y;
    double det = du1 * dv2 - du2 * dv1;
    Vec3 tangent;
    if (std::abs(det) > 1e-14) {
        tangent = (e1 * dv2 - e2 * dv1) / det;
        tangent = tangent - n * dot(tangent, n);  // Gram-Schmidt against the normal
    }
    if (norm2(tangent) < 1e-20) {
        // Degenerate UV map: complete the normal with an arbitrary orthonormal pair.
        Vec3 a = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        tangent = a - n * dot(a, n);
    }
    tangent = normalized(tangent);
    Vec3 bitangent = cross(n, tangent);
    return Mat3::from_columns(tangent, bitangent, n);
}

}  // namespace

PosedMesh pose_mesh(const Skeleton& skeleton, const Pose& pose, const TemplateMesh& mesh) {
    skeleton.validate();
    pose.validate(skeleton.joint_count());
    mesh.validate(skeleton.joint_count());

    std::vector<Rigid> skin = skinning_transforms(skeleton, pose);
    // Blend as linear maps: LBS mixes matrices, not rigid transforms.
    std::vector<Mat3> rot(skin.size());
    for (size_t j = 0; j < skin.size(); ++j) rot[j] = skin[j].q.to_matrix();

    PosedMesh out;
    out.vertices.resize(mesh.vertices.size());
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        Vec3 acc{0, 0, 0};
        for (const SkinWeight& sw : mesh.skin_weights[v]) {
            if (sw.weight == 0.0) continue;
            acc += (rot[sw.joint] * mesh.vertices[v] + skin[sw.joint].t) * sw.weight;
        }
        out.vertices[v] = acc;
    }

    const int T = mesh.triangle_count();
    out.triangle_normals.resize(T);
    out.triangle_tangent_frames.resize(T);
    for (int t = 0; t < T; ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec3& p0 = out.vertices[tri[0]];
        const Vec3& p1 = out.vertices[tri[1]];
        const Vec3& p2 = out.vertices[tri[2]];
        Vec3 c = cross(p1 - p0, p2 - p0);
        double len = norm(c);
        if (len < 1e-14) throw Error(ErrorKind::Domain, "degenerate geometry");
        Vec3 n = c / len;
        out.triangle_normals[t] = n;
        out.triangle_tangent_frames[t] =
            triangle_frame(p0, p1, p2, mesh.uv[tri[0]], mesh.uv[tri[1]], mesh.uv[tri[2]], n);
    }
    return out;
}

bool rigid_subtree_check(const Skeleton& skeleton, const Pose& pose, const TemplateMesh& mesh,
                         int joint, double tol) {
    const int J = skeleton.joint_count();
    if (joint < 0 || joint >= J) throw Error(ErrorKind::Usage, "joint index out of range");

    std::vector<bool> in_subtree(J, false);
    in_subtree[joint] = true;
    for (int j = joint + 1; j < J; ++j) {
        int p = skeleton.parent[j];
        if (p != kNoParent && in_subtree[p]) in_subtree[j] = true;
    }

    std::vector<int> verts;
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        double mass = 0.0;
        for (const SkinWeight& sw : mesh.skin_weights[v])
            if (sw.weight > 0.0 && in_subtree[sw.joint]) mass += sw.weight;
        if (mass >= 1.0 - 1e-9) verts.push_back(v);
    }

    PosedMesh posed = pose_mesh(skeleton, pose, mesh);
    for (size_t a = 0; a < verts.size(); ++a) {
        for (size_t b = a + 1; b < verts.size(); ++b) {
            double d0 = norm(mesh.vertices[verts[a]] - mesh.vertices[verts[b]]);
            double d1 = norm(posed.vertices[verts[a]] - posed.vertices[verts[b]]);
            if (std::abs(d0 - d1) > tol) return false;
        }
    }
    return true;
}

}  // namespace avp
