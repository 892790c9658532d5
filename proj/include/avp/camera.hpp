#pragma once

#include <vector>

#include "avp/error.hpp"
#include "avp/math.hpp"

namespace avp {

// Pinhole camera. x_cam = rotation * x_world + translation, +z looks forward,
// pixel = (fx * x/z + cx, fy * y/z + cy) in continuous pixel coordinates where
// pixel (i, j) covers [i, i+1) x [j, j+1).
struct Camera {
    Mat3 rotation;
    Vec3 translation;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        if (fx <= 0 || fy <= 0) throw Error(ErrorKind::Format, "camera focal length must be positive");
        if (width <= 0 || height <= 0) throw Error(ErrorKind::Format, "camera resolution must be positive");
    }

    Vec3 center() const { return -rotation.t_mul(translation); }
    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }

    // Projects a world point; returns false if behind the camera.
    bool project(const Vec3& p, double& px, double& py, double& depth) const {
        Vec3 c = to_camera(p);
        if (c.z <= 1e-12) return false;
        px = fx * c.x / c.z + cx;
        py = fy * c.y / c.z + cy;
        depth = c.z;
        return true;
    }

    // Unit world-space direction through continuous pixel position (px, py).
    Vec3 pixel_direction(double px, double py) const {
        Vec3 d_cam{(px - cx) / fx, (py - cy) / fy, 1.0};
        return normalized(rotation.t_mul(d_cam));
    }
};

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit
    double t_min = 0.0;
    double t_max = 0.0;
};

struct Aabb {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};

    Vec3 diagonal() const { return hi - lo; }
    void expand(const Vec3& p) {
        lo = cwise_min(lo, p);
        hi = cwise_max(hi, p);
    }
};

// Ray/AABB slab intersection; returns false on miss.
bool intersect_aabb(const Vec3& origin, const Vec3& dir, const Aabb& box, double& t0, double& t1);

// One ray per pixel through the pixel center. The [t_min, t_max] range comes
// from `bounds` (scene bounds, already padded); rays that miss the bounds get
// a degenerate near-zero range.
std::vector<Ray> generate_rays(const Camera& camera, const Aabb& bounds);

}  // namespace avp
