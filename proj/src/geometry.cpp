#include "vpursuit/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "vpursuit/errors.hpp"

namespace vpursuit {

Mat3 wedge(const Vec3& w) {
    Mat3 S;
    S << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
         -w.y(), w.x(), 0.0;
    return S;
}

Vec3 vee(const Mat3& S) {
    if ((S + S.transpose()).norm() >= 1e-9) {
        throw InvalidArgument("vee: matrix is not skew-symmetric");
    }
    return {S(2, 1), S(0, 2), S(1, 0)};
}

Pose Pose::from_vector_form(const Vec3& position, const Vec3& axis_angle) {
    return {exp_so3(axis_angle), position};
}

Eigen::Matrix4d Pose::homogeneous() const {
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    T.topLeftCorner<3, 3>() = rotation_;
    T.topRightCorner<3, 1>() = translation_;
    return T;
}

Vec6 Pose::vector_form() const {
    Vec6 x;
    x << translation_, log_so3(rotation_);
    return x;
}

Pose Pose::reorthonormalized() const {
    Eigen::JacobiSVD<Mat3> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0.0) {
        Mat3 U = svd.matrixU();
        U.col(2) *= -1.0;
        R = U * svd.matrixV().transpose();
    }
    return {R, translation_};
}

Pose compose(const Pose& a, const Pose& b) {
    return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

Pose inverse(const Pose& g) {
    const Mat3 Rt = g.rotation().transpose();
    return {Rt, -Rt * g.translation()};
}

Pose relative(const Pose& g_wi, const Pose& g_wj) { return compose(inverse(g_wi), g_wj); }

Mat6 adjoint(const Pose& g) {
    Mat6 A = Mat6::Zero();
    A.topLeftCorner<3, 3>() = g.rotation();
    A.topRightCorner<3, 3>() = wedge(g.translation()) * g.rotation();
    A.bottomRightCorner<3, 3>() = g.rotation();
    return A;
}

Mat6 adjoint(const Mat3& R) {
    Mat6 A = Mat6::Zero();
    A.topLeftCorner<3, 3>() = R;
    A.bottomRightCorner<3, 3>() = R;
    return A;
}

Mat3 exp_so3(const Vec3& omega_dt) {
    const double theta = omega_dt.norm();
    const Mat3 W = wedge(omega_dt);
    double a = 0.0;
    double b = 0.0;
    if (theta < kSmallAngle) {
        a = 1.0 - theta * theta / 6.0;
        b = 0.5 - theta * theta / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Mat3::Identity() + a * W + b * W * W;
}

Vec3 log_so3(const Mat3& R) {
    const Eigen::AngleAxisd aa(R);
    return aa.axis() * aa.angle();
}

Pose exp_se3(const Twist& xi, double dt) {
    if (dt < 0.0) {
        throw InvalidArgument("exp_se3: negative time step");
    }
    const Vec3 w = xi.angular * dt;
    const Vec3 v = xi.linear * dt;
    const double theta = w.norm();
    const Mat3 W = wedge(w);
    double b = 0.0;
    double c = 0.0;
    if (theta < kSmallAngle) {
        b = 0.5 - theta * theta / 24.0;
        c = 1.0 / 6.0 - theta * theta / 120.0;
    } else {
        const double t2 = theta * theta;
        b = (1.0 - std::cos(theta)) / t2;
        c = (theta - std::sin(theta)) / (t2 * theta);
    }
    const Mat3 V = Mat3::Identity() + b * W + c * W * W;
    return {exp_so3(w), V * v};
}

Vec6 vec_transform(const Pose& g) {
    const Mat3& R = g.rotation();
    const Vec3 sk{0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)), 0.5 * (R(1, 0) - R(0, 1))};
    Vec6 e;
    e << g.translation(), sk;
    return e;
}

Mat3 rotation_from_small_error(const Vec3& w) {
    const double s = w.norm();
    if (s > 1.0) {
        throw InvalidArgument("rotation_from_small_error: |sin(theta)| > 1, rotation error beyond pi/2");
    }
    if (s < 1e-12) {
        return Mat3::Identity();
    }
    return exp_so3(w / s * std::asin(s));
}

double rotation_angle(const Mat3& R) {
    const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
    // acos loses precision near 0; fall back on the sine from the skew part.
    const double s = 0.5 * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1)).norm();
    return std::atan2(s, c);
}

Mat3 rotation_z(double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

bool is_rotation(const Mat3& R, double tol) {
    return (R.transpose() * R - Mat3::Identity()).norm() < tol && std::abs(R.determinant() - 1.0) < tol;
}

}  // namespace vpursuit
