#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vpursuit/geometry.hpp"
#include "vpursuit/gp.hpp"

namespace vpursuit {

struct ControllerGains {
    Mat6 k_c = 10.0 * Mat6::Identity();
    Mat6 k_e = 17.0 * Mat6::Identity();

    static ControllerGains scalar(double k_c, double k_e) {
        return {k_c * Mat6::Identity(), k_e * Mat6::Identity()};
    }
    Mat12 combined() const;
    /// Throws InvalidArgument unless both blocks are symmetric positive definite.
    void validate() const;
};

/// N = [[I, 0], [-Ad_{R_ce^{-1}}, I]].
Mat12 error_output_matrix(const Mat3& R_ce);

/// Smallest eigenvalue of N^T K N.
double lambda_k(const ControllerGains& gains, const Mat3& R_ce);

struct ErrorState {
    Pose g_ce;
    Vec6 e_c;
    Vec6 e_e;
    Vec12 e;
    Vec12 nu;
};

/// e_c = vec(g_d^{-1} g_bar_co), e = [e_c; e_e], nu = N e. Throws
/// AssumptionViolation when |theta_ce| >= pi/2 unless `enforce` is false.
ErrorState control_errors(const Pose& g_bar_co, const Pose& g_d, const Vec6& e_e, bool enforce = true);

struct ControlInput {
    Twist u_c;
    Twist u_e;
};

/// u = -K nu - A~ mu with A~ = [Ad_{R_ce}; I] Ad_{R_ee}.
ControlInput control_input(const Vec12& nu, const Mat3& R_ce, const Mat3& R_ee, const Vec6& mu,
                           const ControllerGains& gains);

/// Observer update over dt with V_wc and u_e held constant:
/// exp(-V_wc dt) g_bar_co exp(-u_e dt).
Pose vmo_step(const Pose& g_bar_co, const Twist& V_wc, const Twist& u_e, double dt);

/// ||alpha^T Sigma^{1/2}(x)|| / Sigma_bar of one model.
double normalized_uncertainty(const GpModel& model, const Vec6& x);

struct SwitchingDecision {
    int selected = 0;   // 0-based model index
    int candidate = 0;  // argmin of the normalized uncertainty
    std::vector<double> uncertainties;
};

/// One pass of the switching estimator: the candidate replaces `current`
/// only when the current model's normalized uncertainty exceeds the
/// candidate's by more than T. A negative `current` initialises to the
/// candidate.
SwitchingDecision estimate_switching(std::span<const GpModel* const> models, const Vec6& x_bar, int current,
                                     double threshold);

/// 1/2 sum (||p||^2 + tr(I - R)) over the control and estimation error poses.
double storage_function(const Pose& g_ce, const Pose& g_ee);

enum class BoundMode { WorstCase, PerModel, AxisKnown };

BoundMode parse_bound_mode(const std::string& name);
std::string to_string(BoundMode mode);

struct BoundParameters {
    double lambda_k = 10.0;
    double lipschitz = 8.0;        // combined L (axis known)
    double lipschitz_p = 8.0;      // translational L_p
    double lipschitz_theta = 0.0;  // rotational L_theta
    double delta = 0.05;
    double rho_bar = 1.0;          // max model error for the worst-case ellipse
    BoundMode mode = BoundMode::AxisKnown;

    /// lambda_K minus the Lipschitz constant relevant to the mode.
    double lambda_tilde() const;
};

struct EllipseValue {
    double value = 0.0;   // E; inside iff E <= 0 up to rounding
    double radius = 0.0;  // c
    bool inside = false;
};

/// Ellipse membership of (e_c, e_e). `beta` and the posterior variance are
/// those of the model in use. Throws PreconditionViolation when the mode
/// needs lambda_tilde > 0 and it is not.
EllipseValue ellipse_membership(const Vec6& e_c, const Vec6& e_e, const BoundParameters& params, const Vec6& beta,
                                const Vec6& variance);

using VelocityField = std::function<Vec6(const Vec6&)>;

/// max ||f(x) - f(x')|| / ||x - x'|| over the pairs.
double empirical_lipschitz(const VelocityField& field, std::span<const std::pair<Vec6, Vec6>> pairs);

/// Per-output constant sigma_f sqrt(lambda_max(Lambda)) ||mu_i||_k of the
/// posterior mean, with the RKHS surrogate of the model.
Vec6 analytic_lipschitz(const GpModel& model);

}  // namespace vpursuit
