#include "layl/geom.hpp"

#include <cmath>

#include "layl/errors.hpp"

namespace layl {

Mat3 quat_to_rotmat(const Quat& q) {
    double n = q.norm();
    if (n <= 1e-12) throw DomainError("quat_to_rotmat: near-zero quaternion norm");
    double x = q.x / n, y = q.y / n, z = q.z / n, w = q.w / n;

    Mat3 r;
    r(0, 0) = 1.0 - 2.0 * (y * y + z * z);
    r(0, 1) = 2.0 * (x * y - z * w);
    r(0, 2) = 2.0 * (x * z + y * w);
    r(1, 0) = 2.0 * (x * y + z * w);
    r(1, 1) = 1.0 - 2.0 * (x * x + z * z);
    r(1, 2) = 2.0 * (y * z - x * w);
    r(2, 0) = 2.0 * (x * z - y * w);
    r(2, 1) = 2.0 * (y * z + x * w);
    r(2, 2) = 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Ray transform_ray(const Ray& r, const RigidScaleTransform& T) {
    Mat3 rot = quat_to_rotmat(T.rotation);
    Ray out;
    out.origin = (rot.apply(r.origin) - T.translation) * T.scale;
    out.direction = rot.apply(r.direction) * T.scale;
    return out;
}

Vec3 transform_point(const Vec3& p, const RigidScaleTransform& T) {
    Mat3 rot = quat_to_rotmat(T.rotation);
    return (rot.apply(p) - T.translation) * T.scale;
}

Mat3 axis_angle_to_rotmat(const Vec3& axis, double angle_rad) {
    Vec3 u = axis.normalized();
    double c = std::cos(angle_rad), s = std::sin(angle_rad), t = 1.0 - c;
    Mat3 r;
    r(0, 0) = c + u.x * u.x * t;
    r(0, 1) = u.x * u.y * t - u.z * s;
    r(0, 2) = u.x * u.z * t + u.y * s;
    r(1, 0) = u.y * u.x * t + u.z * s;
    r(1, 1) = c + u.y * u.y * t;
    r(1, 2) = u.y * u.z * t - u.x * s;
    r(2, 0) = u.z * u.x * t - u.y * s;
    r(2, 1) = u.z * u.y * t + u.x * s;
    r(2, 2) = c + u.z * u.z * t;
    return r;
}

}  // namespace layl
