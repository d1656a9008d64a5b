#pragma once

#include <Eigen/Core>
#include <vector>

#include "vpursuit/geometry.hpp"

namespace vpursuit {

using Vec2 = Eigen::Vector2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using ImageJacobian = Eigen::Matrix<double, Eigen::Dynamic, 6>;

/// Feature points on the target (target frame) and camera focal length.
/// The camera looks along its +y axis.
struct FeatureModel {
    std::vector<Vec3> points;
    double focal_length = 1.0;

    /// Non-coplanar tetrahedron of about 0.2 m extent.
    static FeatureModel default_tetrahedron(double focal_length = 1.0);

    std::size_t size() const { return points.size(); }
    /// Throws InvalidArgument when fewer than four points or lambda <= 0.
    void validate() const;
};

/// m = (lambda / y) [x, z]; throws FeatureBehindCamera for y <= 0.
Vec2 project_point(const Vec3& p_c, double focal_length);

/// Stacked projections f(g_co) of all features, length 2 n_f.
VecX visual_measurement(const Pose& g_co, const FeatureModel& features);

/// Linearisation of f(g_bar_co * g_ee) in vec(g_ee) at g_ee = identity.
ImageJacobian image_jacobian(const Pose& g_bar_co, const FeatureModel& features);

/// Moore-Penrose pseudo-inverse via SVD, singular values below 1e-8 * sigma_max
/// treated as zero. Throws DegenerateView when any is cut.
MatX pseudo_inverse(const MatX& J);

/// e_e = J^+ f_e.
Vec6 recover_estimation_error(const VecX& f_e, const ImageJacobian& J);

}  // namespace vpursuit
