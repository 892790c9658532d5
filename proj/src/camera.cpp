#include "avp/camera.hpp"

#include <cmath>

namespace avp {

bool intersect_aabb(const Vec3& origin, const Vec3& dir, const Aabb& box, double& t0, double& t1) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        double o = origin[i], d = dir[i];
        if (std::abs(d) < 1e-15) {
            if (o < box.lo[i] || o > box.hi[i]) return false;
            continue;
        }
        double inv = 1.0 / d;
        double ta = (box.lo[i] - o) * inv;
        double tb = (box.hi[i] - o) * inv;
        if (ta > tb) std::swap(ta, tb);
        lo = std::max(lo, ta);
        hi = std::min(hi, tb);
        if (lo > hi) return false;
    }
    t0 = lo;
    t1 = hi;
    return true;
}

std::vector<Ray> generate_rays(const Camera& camera, const Aabb& bounds) {
    camera.validate();
    std::vector<Ray> rays;
    rays.reserve(static_cast<size_t>(camera.width) * camera.height);
    Vec3 origin = camera.center();
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            Ray r;
            r.origin = origin;
            r.direction = camera.pixel_direction(x + 0.5, y + 0.5);
            double t0, t1;
            if (intersect_aabb(origin, r.direction, bounds, t0, t1) && t1 > 0.0) {
                r.t_min = std::max(0.0, t0);
                r.t_max = t1;
                if (r.t_max <= r.t_min) r.t_max = r.t_min + 1e-9;
            } else {
                r.t_min = 0.0;
                r.t_max = 1e-9;
            }
            rays.push_back(r);
        }
    }
    return rays;
}

}  // namespace avp
