#pragma once

#include <Eigen/Core>

namespace vpursuit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

/// Below this angle Rodrigues-type coefficients switch to their Taylor series.
inline constexpr double kSmallAngle = 1e-8;

/// Body velocity (v, omega) of a rigid body.
struct Twist {
    Vec3 linear = Vec3::Zero();
    Vec3 angular = Vec3::Zero();

    Twist() = default;
    Twist(const Vec3& v, const Vec3& w) : linear(v), angular(w) {}

    static Twist from_vector(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }
    Vec6 vector() const {
        Vec6 x;
        x << linear, angular;
        return x;
    }
    Twist operator-() const { return {-linear, -angular}; }
};

/// Element of SE(3) stored as rotation + translation.
class Pose {
public:
    Pose() = default;
    Pose(const Mat3& rotation, const Vec3& translation) : rotation_(rotation), translation_(translation) {}

    static Pose identity() { return {}; }
    static Pose from_translation(const Vec3& p) { return {Mat3::Identity(), p}; }
    /// Position plus axis-angle vector (unit axis scaled by the angle).
    static Pose from_vector_form(const Vec3& position, const Vec3& axis_angle);

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Eigen::Matrix4d homogeneous() const;
    Vec3 transform(const Vec3& point) const { return rotation_ * point + translation_; }

    /// Vector form [p; xi*theta] with theta in [0, pi].
    Vec6 vector_form() const;

    /// Projects the rotation back onto SO(3) (polar decomposition).
    Pose reorthonormalized() const;

private:
    Mat3 rotation_ = Mat3::Identity();
    Vec3 translation_ = Vec3::Zero();
};

Mat3 wedge(const Vec3& w);
/// Inverse of wedge; throws InvalidArgument when ||S + S^T|| >= 1e-9.
Vec3 vee(const Mat3& S);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& g);
/// g_ij = g_wi^{-1} g_wj.
Pose relative(const Pose& g_wi, const Pose& g_wj);

/// Ad_g = [[R, p^R], [0, R]].
Mat6 adjoint(const Pose& g);
/// Adjoint of the pure rotation (R, 0), i.e. diag(R, R).
Mat6 adjoint(const Mat3& R);

Mat3 exp_so3(const Vec3& omega_dt);
Vec3 log_so3(const Mat3& R);
/// exp(dt * xi^) for a body twist held constant over dt.
Pose exp_se3(const Twist& xi, double dt);

/// [p; sk(R)^vee] with sk(R) = (R - R^T) / 2.
Vec6 vec_transform(const Pose& g);

/// Inverts sk(R)^vee = sin(theta) * axis for |theta| < pi/2.
Mat3 rotation_from_small_error(const Vec3& w);

/// Rotation angle of R in [0, pi].
double rotation_angle(const Mat3& R);

Mat3 rotation_z(double angle);

bool is_rotation(const Mat3& R, double tol = 1e-9);

}  // namespace vpursuit
