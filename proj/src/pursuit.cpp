#include "vpursuit/pursuit.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "vpursuit/errors.hpp"

namespace vpursuit {

Mat12 ControllerGains::combined() const {
    Mat12 K = Mat12::Zero();
    K.topLeftCorner<6, 6>() = k_c;
    K.bottomRightCorner<6, 6>() = k_e;
    return K;
}

void ControllerGains::validate() const {
    for (const Mat6* k : {&k_c, &k_e}) {
        if ((*k - k->transpose()).norm() > 1e-12) {
            throw InvalidArgument("controller gain is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Mat6> es(*k);
        if (!(es.eigenvalues().minCoeff() > 0.0)) {
            throw InvalidArgument("controller gain is not positive definite");
        }
    }
}

Mat12 error_output_matrix(const Mat3& R_ce) {
    Mat12 N = Mat12::Identity();
    N.bottomLeftCorner<6, 6>() = -adjoint(Mat3(R_ce.transpose()));
    return N;
}

double lambda_k(const ControllerGains& gains, const Mat3& R_ce) {
    const Mat12 N = error_output_matrix(R_ce);
    const Mat12 M = N.transpose() * gains.combined() * N;
    Eigen::SelfAdjointEigenSolver<Mat12> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

ErrorState control_errors(const Pose& g_bar_co, const Pose& g_d, const Vec6& e_e, bool enforce) {
    ErrorState s;
    s.g_ce = relative(g_d, g_bar_co);
    if (enforce && rotation_angle(s.g_ce.rotation()) >= 0.5 * std::numbers::pi) {
        throw AssumptionViolation("control rotation error reached pi/2");
    }
    s.e_c = vec_transform(s.g_ce);
    s.e_e = e_e;
    s.e << s.e_c, s.e_e;
    s.nu = error_output_matrix(s.g_ce.rotation()) * s.e;
    return s;
}

ControlInput control_input(const Vec12& nu, const Mat3& R_ce, const Mat3& R_ee, const Vec6& mu,
                           const ControllerGains& gains) {
    const Vec6 ff = adjoint(R_ee) * mu;
    const Vec6 u_c = -gains.k_c * nu.head<6>() - adjoint(R_ce) * ff;
    const Vec6 u_e = -gains.k_e * nu.tail<6>() - ff;
    return {Twist::from_vector(u_c), Twist::from_vector(u_e)};
}

Pose vmo_step(const Pose& g_bar_co, const Twist& V_wc, const Twist& u_e, double dt) {
    if (!(dt > 0.0)) {
        throw InvalidArgument("vmo_step: dt must be positive");
    }
    return compose(compose(exp_se3(-V_wc, dt), g_bar_co), exp_se3(-u_e, dt));
}

double normalized_uncertainty(const GpModel& model, const Vec6& x) {
    return weighted_std_norm(model.alpha(), model.posterior(x).variance) / model.sigma_bar();
}

SwitchingDecision estimate_switching(std::span<const GpModel* const> models, const Vec6& x_bar, int current,
                                     double threshold) {
    if (models.empty()) {
        throw InvalidArgument("estimate_switching: no models");
    }
    if (!(threshold >= 0.0 && threshold < 1.0)) {
        throw InvalidArgument("switching threshold must lie in [0, 1)");
    }
    SwitchingDecision d;
    d.uncertainties.reserve(models.size());
    for (const GpModel* m : models) {
        d.uncertainties.push_back(normalized_uncertainty(*m, x_bar));
    }
    for (std::size_t k = 1; k < models.size(); ++k) {
        if (d.uncertainties[k] < d.uncertainties[static_cast<std::size_t>(d.candidate)]) {
            d.candidate = static_cast<int>(k);
        }
    }
    if (current < 0 || current >= static_cast<int>(models.size())) {
        d.selected = d.candidate;
        return d;
    }
    d.selected = current;
    if (d.uncertainties[static_cast<std::size_t>(current)] >
        d.uncertainties[static_cast<std::size_t>(d.candidate)] + threshold) {
        d.selected = d.candidate;
    }
    return d;
}

double storage_function(const Pose& g_ce, const Pose& g_ee) {
    double s = 0.0;
    for (const Pose* g : {&g_ce, &g_ee}) {
        s += g->translation().squaredNorm() + (3.0 - g->rotation().trace());
    }
    return 0.5 * s;
}

BoundMode parse_bound_mode(const std::string& name) {
    if (name == "worst_case") {
        return BoundMode::WorstCase;
    }
    if (name == "per_model") {
        return BoundMode::PerModel;
    }
    if (name == "axis_known") {
        return BoundMode::AxisKnown;
    }
    throw InvalidArgument("unknown bound mode '" + name + "'");
}

std::string to_string(BoundMode mode) {
    switch (mode) {
        case BoundMode::WorstCase:
            return "worst_case";
        case BoundMode::PerModel:
            return "per_model";
        case BoundMode::AxisKnown:
            break;
    }
    return "axis_known";
}

double BoundParameters::lambda_tilde() const {
    switch (mode) {
        case BoundMode::WorstCase:
            return lambda_k;
        case BoundMode::PerModel:
            return lambda_k - lipschitz_p;
        case BoundMode::AxisKnown:
            break;
    }
    return lambda_k - lipschitz;
}

namespace {

// The origin lies on the boundary; rounding must not push it outside.
constexpr double kBoundaryTolerance = 1e-12;

}  // namespace

EllipseValue ellipse_membership(const Vec6& e_c, const Vec6& e_e, const BoundParameters& params, const Vec6& beta,
                                const Vec6& variance) {
    const double nc = e_c.norm();
    const double ne = e_e.norm();
    EllipseValue out;
    if (params.mode == BoundMode::WorstCase) {
        if (!(params.lambda_k > 0.0)) {
            throw PreconditionViolation("worst-case ellipse needs lambda_K > 0");
        }
        out.radius = params.rho_bar / (2.0 * params.lambda_k);
        out.value = std::hypot(nc, ne - out.radius) - out.radius;
        out.inside = out.value <= kBoundaryTolerance * std::max(1.0, out.radius);
        return out;
    }
    const double lt = params.lambda_tilde();
    if (!(lt > 0.0)) {
        throw PreconditionViolation("lambda_K - L = " + std::to_string(lt) + " is not positive");
    }
    double c = weighted_std_norm(beta, variance) / (2.0 * lt);
    if (params.mode == BoundMode::PerModel) {
        c += std::numbers::pi * params.lipschitz_theta / lt;
    }
    const double ratio = lt / params.lambda_k;
    out.radius = c;
    out.value = std::sqrt(nc * nc + ratio * (ne - c) * (ne - c)) - std::sqrt(ratio) * c;
    out.inside = out.value <= kBoundaryTolerance * std::max(1.0, out.radius);
    return out;
}

double empirical_lipschitz(const VelocityField& field, std::span<const std::pair<Vec6, Vec6>> pairs) {
    if (pairs.empty()) {
        throw InvalidArgument("empirical_lipschitz: no sample pairs");
    }
    double best = 0.0;
    for (const auto& [a, b] : pairs) {
        const double dist = (a - b).norm();
        if (dist <= 0.0) {
            continue;
        }
        best = std::max(best, (field(a) - field(b)).norm() / dist);
    }
    return best;
}

Vec6 analytic_lipschitz(const GpModel& model) {
    const Vec6 rkhs_sq = model.rkhs_norm_sq_surrogate();
    Vec6 L;
    for (int i = 0; i < kGpDims; ++i) {
        const Hyperparameters& hp = model.hyperparameters(i);
        const double lambda_max = hp.inverse_squared_lengthscales().maxCoeff();
        L(i) = hp.signal_std * std::sqrt(lambda_max * rkhs_sq(i));
    }
    return L;
}

}  // namespace vpursuit
