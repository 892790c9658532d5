#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace avp {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline double cross2(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    Vec3& operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double norm2(const Vec3& v) { return dot(v, v); }
inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return n > 0.0 ? v / n : Vec3{0, 0, 0};
}
inline Vec3 cwise_mul(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

// Row-major 3x3 matrix.
struct Mat3 {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    static Mat3 identity() { return Mat3{}; }
    static Mat3 zero() {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = 0.0;
        return r;
    }
    static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            r.m[i][0] = c0[i];
            r.m[i][1] = c1[i];
            r.m[i][2] = c2[i];
        }
        return r;
    }
    static Mat3 skew(const Vec3& w) {
        Mat3 r = Mat3::zero();
        r.m[0][1] = -w.z;
        r.m[0][2] = w.y;
        r.m[1][0] = w.z;
        r.m[1][2] = -w.x;
        r.m[2][0] = -w.y;
        r.m[2][1] = w.x;
        return r;
    }

    Vec3 row(int i) const { return {m[i][0], m[i][1], m[i][2]}; }
    Vec3 col(int j) const { return {m[0][j], m[1][j], m[2][j]}; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r = Mat3::zero();
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j) r.m[i][j] += m[i][k] * o.m[k][j];
        return r;
    }
    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }
    Mat3 operator*(double s) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] * s;
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
        return r;
    }
    // Rotation transpose applied to a vector, avoids materializing the transpose.
    Vec3 t_mul(const Vec3& v) const {
        return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
                m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
                m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
    }
    double det() const {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }
};

// Unit quaternion (w, x, y, z).
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Quat() = default;
    Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    static Quat identity() { return Quat{}; }
    static Quat from_axis_angle(const Vec3& axis, double angle) {
        Vec3 u = avp::normalized(axis);
        double h = 0.5 * angle;
        double s = std::sin(h);
        return {std::cos(h), u.x * s, u.y * s, u.z * s};
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat normalized() const {
        double n = norm();
        return {w / n, x / n, y / n, z / n};
    }
    Quat conjugate() const { return {w, -x, -y, -z}; }

    Quat operator*(const Quat& q) const {
        return {w * q.w - x * q.x - y * q.y - z * q.z, w * q.x + x * q.w + y * q.z - z * q.y,
                w * q.y - x * q.z + y * q.w + z * q.x, w * q.z + x * q.y - y * q.x + z * q.w};
    }

    Vec3 rotate(const Vec3& v) const {
        // v' = v + 2 q_v x (q_v x v + w v)
        Vec3 qv{x, y, z};
        Vec3 t = cross(qv, v) * 2.0;
        return v + t * w + cross(qv, t);
    }

    Mat3 to_matrix() const {
        Mat3 r;
        double xx = x * x, yy = y * y, zz = z * z;
        double xy = x * y, xz = x * z, yz = y * z;
        double wx = w * x, wy = w * y, wz = w * z;
        r.m[0][0] = 1 - 2 * (yy + zz);
        r.m[0][1] = 2 * (xy - wz);
        r.m[0][2] = 2 * (xz + wy);
        r.m[1][0] = 2 * (xy + wz);
        r.m[1][1] = 1 - 2 * (xx + zz);
        r.m[1][2] = 2 * (yz - wx);
        r.m[2][0] = 2 * (xz - wy);
        r.m[2][1] = 2 * (yz + wx);
        r.m[2][2] = 1 - 2 * (xx + yy);
        return r;
    }
};

// Rigid transform p -> q.rotate(p) + t.
struct Rigid {
    Quat q;
    Vec3 t;

    static Rigid identity() { return {Quat::identity(), Vec3{0, 0, 0}}; }

    Vec3 apply(const Vec3& p) const { return q.rotate(p) + t; }
    Rigid compose(const Rigid& o) const { return {q * o.q, q.rotate(o.t) + t}; }
    Rigid inverse() const {
        Quat qi = q.conjugate();
        return {qi, qi.rotate(-t)};
    }
};

// Rodrigues' formula.
inline Mat3 so3_exp(const Vec3& w) {
    double th2 = norm2(w);
    double th = std::sqrt(th2);
    double a, b;  // sin(th)/th, (1-cos(th))/th^2
    if (th < 1e-8) {
        a = 1.0 - th2 / 6.0;
        b = 0.5 - th2 / 24.0;
    } else {
        a = std::sin(th) / th;
        b = (1.0 - std::cos(th)) / th2;
    }
    Mat3 K = Mat3::skew(w);
    return Mat3::identity() + K * a + (K * K) * b;
}

inline Vec3 so3_log(const Mat3& R) {
    double tr = R.m[0][0] + R.m[1][1] + R.m[2][2];
    double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
    double th = std::acos(c);
    Vec3 v{R.m[2][1] - R.m[1][2], R.m[0][2] - R.m[2][0], R.m[1][0] - R.m[0][1]};
    if (th < 1e-7) return v * 0.5;
    if (th > M_PI - 1e-5) {
        // Near pi the skew part vanishes; extract the axis from the symmetric part.
        Vec3 axis;
        double xx = (R.m[0][0] + 1.0) * 0.5;
        double yy = (R.m[1][1] + 1.0) * 0.5;
        double zz = (R.m[2][2] + 1.0) * 0.5;
        if (xx >= yy && xx >= zz) {
            axis.x = std::sqrt(std::max(0.0, xx));
            axis.y = (R.m[0][1] + R.m[1][0]) * 0.25 / axis.x;
            axis.z = (R.m[0][2] + R.m[2][0]) * 0.25 / axis.x;
        } else if (yy >= zz) {
            axis.y = std::sqrt(std::max(0.0, yy));
            axis.x = (R.m[0][1] + R.m[1][0]) * 0.25 / axis.y;
            axis.z = (R.m[1][2] + R.m[2][1]) * 0.25 / axis.y;
        } else {
            axis.z = std::sqrt(std::max(0.0, zz));
            axis.x = (R.m[0][2] + R.m[2][0]) * 0.25 / axis.z;
            axis.y = (R.m[1][2] + R.m[2][1]) * 0.25 / axis.z;
        }
        // Pick the sign consistent with the skew part when it is nonzero.
        if (dot(axis, v) < 0.0) axis = -axis;
        return normalized(axis) * th;
    }
    return v * (0.5 * th / std::sin(th));
}

// Left Jacobian of SO(3): exp((w + d)^) ~= exp((J_l(w) d)^) exp(w^).
inline Mat3 so3_left_jacobian(const Vec3& w) {
    double th2 = norm2(w);
    double th = std::sqrt(th2);
    double b, c;  // (1-cos)/th^2, (th-sin)/th^3
    if (th < 1e-6) {
        b = 0.5 - th2 / 24.0;
        c = 1.0 / 6.0 - th2 / 120.0;
    } else {
        b = (1.0 - std::cos(th)) / th2;
        c = (th - std::sin(th)) / (th2 * th);
    }
    Mat3 K = Mat3::skew(w);
    return Mat3::identity() + K * b + (K * K) * c;
}

// Deterministic 64-bit RNG (xoshiro-free: std::mt19937_64 is standard-pinned,
// but bounded draws go through this helper to stay implementation-independent).
inline uint64_t rng_bounded(uint64_t raw, uint64_t n) { return raw % n; }

}  // namespace avp
