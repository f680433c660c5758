#pragma once
#include <array>
#include <cmath>

namespace layl {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& b) const { return {x + b.x, y + b.y, z + b.z}; }
    Vec3 operator-(const Vec3& b) const { return {x - b.x, y - b.y, z - b.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 cmul(const Vec3& b) const { return {x * b.x, y * b.y, z * b.z}; }
    double dot(const Vec3& b) const { return x * b.x + y * b.y + z * b.z; }
    Vec3 cross(const Vec3& b) const {
        return {y * b.z - z * b.y, z * b.x - x * b.z, x * b.y - y * b.x};
    }
    double norm2() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Rotation quaternion, (x, y, z, w) component order with w last.
struct Quat {
    double x = 0.0, y = 0.0, z = 0.0, w = 1.0;

    Quat() = default;
    Quat(double x_, double y_, double z_, double w_) : x(x_), y(y_), z(z_), w(w_) {}

    double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }
    static Quat identity() { return {0.0, 0.0, 0.0, 1.0}; }
};

struct Ray {
    Vec3 origin;
    Vec3 direction;

    Vec3 at(double t) const { return origin + direction * t; }
};

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{};

    double operator()(int r, int c) const { return m[size_t(3 * r + c)]; }
    double& operator()(int r, int c) { return m[size_t(3 * r + c)]; }

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 transposed() const {
        Mat3 t;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
        return t;
    }

    static Mat3 identity() {
        Mat3 i;
        i.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return i;
    }
};

// Per-field affine placement: 8 scalars (quaternion, translation, uniform scale).
// Scale may be negative; a reflected field is a valid arrangement.
struct RigidScaleTransform {
    Quat rotation = Quat::identity();
    Vec3 translation{};
    double scale = 1.0;

    static RigidScaleTransform identity() { return {}; }
};

// Rotation matrix from a quaternion. The quaternion is normalized on every
// evaluation; a near-zero norm (<= 1e-12) is a degenerate input.
Mat3 quat_to_rotmat(const Quat& q);

// Instance-specific ray: o' = s * (R * o - t), d' = s * R * d.
Ray transform_ray(const Ray& r, const RigidScaleTransform& T);

// Point transform matching transform_ray: mu' = s * (R * mu - t).
Vec3 transform_point(const Vec3& p, const RigidScaleTransform& T);

// Rodrigues rotation about a unit axis; used as an independent cross-check
// against the quaternion path.
Mat3 axis_angle_to_rotmat(const Vec3& axis, double angle_rad);

}  // namespace layl
