#include "vpursuit/vision.hpp"

#include <Eigen/SVD>
#include <string>

#include "vpursuit/errors.hpp"

namespace vpursuit {

FeatureModel FeatureModel::default_tetrahedron(double focal_length) {
    return {{Vec3(0.0, 0.0, 0.1), Vec3(0.1, 0.0, -0.1), Vec3(-0.1, 0.1, -0.1), Vec3(-0.1, -0.1, -0.1)},
            focal_length};
}

void FeatureModel::validate() const {
    if (points.size() < 4) {
        throw InvalidArgument("feature model needs at least 4 points, got " + std::to_string(points.size()));
    }
    if (!(focal_length > 0.0)) {
        throw InvalidArgument("focal length must be positive");
    }
}

Vec2 project_point(const Vec3& p_c, double focal_length) {
    if (!(p_c.y() > 0.0)) {
        throw FeatureBehindCamera("feature at depth " + std::to_string(p_c.y()) + " is behind the camera");
    }
    return (focal_length / p_c.y()) * Vec2(p_c.x(), p_c.z());
}

VecX visual_measurement(const Pose& g_co, const FeatureModel& features) {
    VecX f(2 * features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        f.segment<2>(2 * i) = project_point(g_co.transform(features.points[i]), features.focal_length);
    }
    return f;
}

ImageJacobian image_jacobian(const Pose& g_bar_co, const FeatureModel& features) {
    const auto n = static_cast<Eigen::Index>(features.size());
    ImageJacobian J(2 * n, 6);
    const Mat3& R = g_bar_co.rotation();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3& p_o = features.points[static_cast<std::size_t>(i)];
        const Vec3 p_c = g_bar_co.transform(p_o);
        if (!(p_c.y() > 0.0)) {
            throw FeatureBehindCamera("image_jacobian: feature behind the camera");
        }
        const double x = p_c.x();
        const double y = p_c.y();
        const double z = p_c.z();
        Eigen::Matrix<double, 2, 3> dm_dp;
        dm_dp << 1.0, -x / y, 0.0,
                 0.0, -z / y, 1.0;
        dm_dp *= features.focal_length / y;
        Eigen::Matrix<double, 3, 6> dp_de;
        dp_de << Mat3::Identity(), -wedge(p_o);
        J.middleRows<2>(2 * i) = dm_dp * R * dp_de;
    }
    return J;
}

MatX pseudo_inverse(const MatX& J) {
    Eigen::JacobiSVD<MatX> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VecX& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) {
        throw DegenerateView("pseudo_inverse: zero matrix");
    }
    const double cutoff = 1e-8 * s(0);
    VecX s_inv(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) <= cutoff) {
            throw DegenerateView("image Jacobian is rank deficient (sigma_min / sigma_max = " +
                                 std::to_string(s(i) / s(0)) + ")");
        }
        s_inv(i) = 1.0 / s(i);
    }
    return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

Vec6 recover_estimation_error(const VecX& f_e, const ImageJacobian& J) {
    if (f_e.size() != J.rows()) {
        throw InvalidArgument("recover_estimation_error: measurement and Jacobian sizes differ");
    }
    return pseudo_inverse(J) * f_e;
}

}  // namespace vpursuit
