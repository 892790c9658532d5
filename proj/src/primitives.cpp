#include "avp/primitives.hpp"

#include <cmath>

namespace avp {

std::vector<PrimitiveBasis> init_basis(const TemplateMesh& mesh, const PosedMesh& posed,
                                       const TexelGrid& grid, const BasisConfig& config) {
    std::vector<PrimitiveBasis> out;
    out.reserve(grid.valid_texels.size());
    const double inv_2w = 1.0 / (2.0 * grid.resolution);

    for (int texel : grid.valid_texels) {
        const TexelGrid::Entry& e = grid.entries[texel];
        const auto& tri = mesh.triangles[e.triangle];

        // UV gradient of the canonical rest shape across the triangle's affine map.
        Vec3 p0 = mesh.vertices[tri[0]], p1 = mesh.vertices[tri[1]], p2 = mesh.vertices[tri[2]];
        Vec2 t0 = mesh.uv[tri[0]], t1 = mesh.uv[tri[1]], t2 = mesh.uv[tri[2]];
        double du1 = t1.x - t0.x, dv1 = t1.y - t0.y;
        double du2 = t2.x - t0.x, dv2 = t2.y - t0.y;
        double det = du1 * dv2 - du2 * dv1;
        if (std::abs(det) < 1e-14) throw Error(ErrorKind::Domain, "degenerate UV");
        Vec3 e1 = p1 - p0, e2 = p2 - p0;
        Vec3 dxdu = (e1 * dv2 - e2 * dv1) / det;
        Vec3 dxdv = (e2 * du1 - e1 * du2) / det;

        PrimitiveBasis basis;
        basis.position = texel_surface_point(grid, mesh, posed, texel);
        basis.orientation = posed.triangle_tangent_frames[e.triangle];
        double su = norm(dxdu) * inv_2w;
        double sv = norm(dxdv) * inv_2w;
        basis.scale = {su, sv, config.thickness_factor * 0.5 * (su + sv)};
        out.push_back(basis);
    }
    return out;
}

PrimitiveSet apply_correctives(const std::vector<PrimitiveBasis>& basis,
                               const std::vector<Correctives>& correctives,
                               const std::vector<int>& texels, int payload_res) {
    if (basis.size() != correctives.size())
        throw Error(ErrorKind::Usage, "basis and corrective counts differ");
    if (texels.size() != basis.size())
        throw Error(ErrorKind::Usage, "basis and texel counts differ");

    PrimitiveSet set;
    set.count = static_cast<int>(basis.size());
    set.payload_res = payload_res;
    set.texel = texels;
    set.position.resize(set.count);
    set.rotation.resize(set.count);
    set.scale.resize(set.count);
    size_t vox = static_cast<size_t>(payload_res) * payload_res * payload_res;
    set.rgb.assign(static_cast<size_t>(set.count) * 3 * vox, 0.0);
    set.alpha.assign(static_cast<size_t>(set.count) * vox, 0.0);

    for (int k = 0; k < set.count; ++k) {
        const Correctives& c = correctives[k];
        set.position[k] = basis[k].position + c.delta_position;
        set.rotation[k] = so3_exp(c.delta_rotation) * basis[k].orientation;
        Vec3 s = basis[k].scale + c.delta_scale;
        for (int i = 0; i < 3; ++i) {
            if (s[i] < kScaleFloor) {
                s[i] = kScaleFloor;
                ++set.clamped_scale_count;
            }
        }
        set.scale[k] = s;
    }
    return set;
}

CorrectiveGrads apply_correctives_backward(const PrimitiveBasis& basis, const Correctives& corr,
                                           const Vec3& d_position_world,
                                           const Vec3& d_rotation_world,
                                           const Vec3& d_scale_world) {
    CorrectiveGrads g;
    g.d_position = d_position_world;
    // R = exp(dR) R_hat; a perturbation dR -> dR + e moves R by
    // exp((J_l(dR) e)^) R, so the pullback is J_l^T.
    g.d_rotation = so3_left_jacobian(corr.delta_rotation).t_mul(d_rotation_world);
    Vec3 s = basis.scale + corr.delta_scale;
    for (int i = 0; i < 3; ++i) g.d_scale[i] = s[i] < kScaleFloor ? 0.0 : d_scale_world[i];
    return g;
}

}  // namespace avp
