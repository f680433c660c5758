#include <cmath>

#include "doctest.h"
#include "layl/errors.hpp"
#include "layl/geom.hpp"
#include "layl/rng.hpp"

using namespace layl;

namespace {

void check_mat_close(const Mat3& a, const Mat3& b, double tol) {
    for (int i = 0; i < 9; ++i) CHECK(std::fabs(a.m[size_t(i)] - b.m[size_t(i)]) <= tol);
}

}  // namespace

TEST_CASE("identity quaternion gives identity matrix") {
    Mat3 r = quat_to_rotmat(Quat::identity());
    check_mat_close(r, Mat3::identity(), 0.0);
}

TEST_CASE("quaternion normalization: (0,0,0,2) is still identity") {
    Mat3 r = quat_to_rotmat({0.0, 0.0, 0.0, 2.0});
    check_mat_close(r, Mat3::identity(), 0.0);
}

TEST_CASE("90 degree rotation about z maps x to y") {
    double s = std::sqrt(2.0) / 2.0;
    Mat3 r = quat_to_rotmat({0.0, 0.0, s, s});
    Vec3 v = r.apply({1.0, 0.0, 0.0});
    CHECK(std::fabs(v.x - 0.0) < 1e-12);
    CHECK(std::fabs(v.y - 1.0) < 1e-12);
    CHECK(std::fabs(v.z - 0.0) < 1e-12);

    // Cross-check the quaternion path against an angle-axis construction.
    Mat3 oracle = axis_angle_to_rotmat({0.0, 0.0, 1.0}, M_PI / 2.0);
    check_mat_close(r, oracle, 1e-12);
}

TEST_CASE("quaternion to matrix against angle-axis oracle on random rotations") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
        if (axis.norm() < 1e-6) continue;
        axis = axis.normalized();
        double angle = rng.uniform(-M_PI, M_PI);
        Quat q{axis.x * std::sin(angle / 2.0), axis.y * std::sin(angle / 2.0),
               axis.z * std::sin(angle / 2.0), std::cos(angle / 2.0)};
        check_mat_close(quat_to_rotmat(q), axis_angle_to_rotmat(axis, angle), 1e-12);
    }
}

TEST_CASE("rotation matrices are orthonormal with determinant +1") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        if (q.norm() < 1e-6) continue;
        Mat3 r = quat_to_rotmat(q);
        Mat3 rt = r.transposed();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (int k = 0; k < 3; ++k) dot += rt(i, k) * r(k, j);
                CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
        double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                     r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                     r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
        CHECK(std::fabs(det - 1.0) < 1e-12);
    }
}

TEST_CASE("scale invariance of quaternion normalization") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        if (q.norm() < 1e-3) continue;
        Mat3 base = quat_to_rotmat(q);
        // Power-of-two scalings are exact in floating point.
        for (double lam : {2.0, 4.0, 0.5}) {
            Mat3 scaled = quat_to_rotmat({lam * q.x, lam * q.y, lam * q.z, lam * q.w});
            check_mat_close(base, scaled, 0.0);
        }
        Mat3 scaled3 = quat_to_rotmat({3.0 * q.x, 3.0 * q.y, 3.0 * q.z, 3.0 * q.w});
        check_mat_close(base, scaled3, 1e-14);
    }
}

TEST_CASE("near-zero quaternion is a degenerate input") {
    CHECK_THROWS_AS(quat_to_rotmat({0.0, 0.0, 0.0, 0.0}), DomainError);
    CHECK_THROWS_AS(quat_to_rotmat({1e-13, 0.0, 0.0, 0.0}), DomainError);
}

TEST_CASE("transform_ray with the identity transform is the identity map") {
    Ray r{{0.3, -1.2, 2.0}, {0.1, 0.5, -0.7}};
    Ray out = transform_ray(r, RigidScaleTransform::identity());
    CHECK(out.origin.x == r.origin.x);
    CHECK(out.origin.y == r.origin.y);
    CHECK(out.origin.z == r.origin.z);
    CHECK(out.direction.x == r.direction.x);
    CHECK(out.direction.y == r.direction.y);
    CHECK(out.direction.z == r.direction.z);
}

TEST_CASE("pure scale doubles origin and direction") {
    RigidScaleTransform T;
    T.scale = 2.0;
    Ray out = transform_ray({{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}}, T);
    CHECK(out.origin.x == 2.0);
    CHECK(out.origin.y == 0.0);
    CHECK(out.origin.z == 0.0);
    CHECK(out.direction.x == 0.0);
    CHECK(out.direction.y == 0.0);
    CHECK(out.direction.z == 2.0);
}

TEST_CASE("rotate then translate matches the matrix-apply oracle") {
    double s = std::sqrt(2.0) / 2.0;
    RigidScaleTransform T;
    T.rotation = {0.0, 0.0, s, s};
    T.translation = {0.0, 1.0, 0.0};
    T.scale = 1.0;
    Ray out = transform_ray({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}, T);
    CHECK(std::fabs(out.origin.x) < 1e-12);
    CHECK(std::fabs(out.origin.y) < 1e-12);
    CHECK(std::fabs(out.origin.z) < 1e-12);

    // Independent oracle: apply the angle-axis matrix directly.
    Mat3 rot = axis_angle_to_rotmat({0.0, 0.0, 1.0}, M_PI / 2.0);
    Vec3 expect_dir = (rot.apply({0.0, 1.0, 0.0}) - Vec3{}) * 1.0;
    CHECK(std::fabs(out.direction.x - expect_dir.x) < 1e-12);
    CHECK(std::fabs(out.direction.y - expect_dir.y) < 1e-12);
    CHECK(std::fabs(out.direction.z - expect_dir.z) < 1e-12);
}

TEST_CASE("points along a transformed ray match the point transform") {
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        RigidScaleTransform T;
        T.rotation = {rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3),
                      rng.normal(1, 0.3)};
        T.translation = {rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5)};
        T.scale = rng.normal(1, 0.3);
        Ray base{{rng.normal(), rng.normal(), rng.normal()},
                 {rng.normal(), rng.normal(), rng.normal()}};
        if (base.direction.norm() < 1e-3 || T.rotation.norm() < 1e-3) continue;
        Ray rk = transform_ray(base, T);
        for (int i = 0; i < 10; ++i) {
            double t = rng.uniform(0.0, 5.0);
            Vec3 via_ray = rk.at(t);
            Vec3 via_point = transform_point(base.at(t), T);
            CHECK(std::fabs(via_ray.x - via_point.x) < 1e-12);
            CHECK(std::fabs(via_ray.y - via_point.y) < 1e-12);
            CHECK(std::fabs(via_ray.z - via_point.z) < 1e-12);
        }
    }
}
