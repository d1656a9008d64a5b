#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vpursuit/errors.hpp"
#include "vpursuit/geometry.hpp"
#include "vpursuit/gp.hpp"
#include "vpursuit/motion.hpp"
#include "vpursuit/pursuit.hpp"
#include "vpursuit/vision.hpp"

namespace vpursuit {

enum class PursuitCase { Single, Switched };
enum class ViolationPolicy { Continue, Abort };

PursuitCase parse_case(const std::string& name);
std::string to_string(PursuitCase c);

struct TrainingSpec {
    int points_per_profile = 30;
    Vec6 noise_std = Vec6::Constant(0.01);
    FitOptions fit;
};

/// Planar box of target positions; headings span the full circle about +z.
struct Domain {
    double x_min = -3.0;
    double x_max = 3.0;
    double y_min = -3.0;
    double y_max = 3.0;

    /// Grid of vector-form poses with the given resolution per axis.
    std::vector<Vec6> grid(int nx, int ny, int n_heading) const;
};

struct Scenario {
    Pose g_wo0 = Pose::from_translation({-2.0, 0.0, 0.0});
    Pose g_wc0 = Pose::from_translation({-2.0, -3.0, 0.0});
    Pose g_bar_co0 = Pose::from_translation({0.0, 1.0, 0.0});
    Pose g_d = Pose::from_translation({0.0, 2.0, 0.0});
    ControllerGains gains;
    std::vector<ProfilePtr> profiles;
    SwitchSchedule schedule;
    FeatureModel features = FeatureModel::default_tetrahedron();
    double dt = 0.02;
    double duration = 20.0;
    std::uint64_t seed = 1;
    PursuitCase pursuit_case = PursuitCase::Switched;
    double threshold = 0.05;
    Vec6 alpha = Vec6::Unit(1);
    BoundParameters bounds;
    double transient = 2.0;
    bool use_gp = true;
    double pixel_noise_std = 0.0;
    int target_substeps = 10;
    ViolationPolicy on_violation = ViolationPolicy::Continue;
    TrainingSpec training;
    Domain domain;

    /// Nominal set-up: two Van der Pol profiles switching at (+-2, 0, 0).
    static Scenario nominal();
    /// Throws ConfigError on invalid values.
    void validate() const;
    long steps() const;
};

struct TraceRecord {
    double t = 0.0;
    int psi_true = 1;  // 1-based
    int psi_est = 1;   // 1-based
    Pose g_wo;
    Pose g_wc;
    Pose g_bar_co;
    Vec6 e_c = Vec6::Zero();
    Vec6 e_e = Vec6::Zero();           // ground truth vec(g_ee)
    Vec6 e_e_measured = Vec6::Zero();  // recovered from the image
    double e_norm = 0.0;
    Vec12 nu = Vec12::Zero();
    Vec12 u = Vec12::Zero();
    Vec6 variance = Vec6::Zero();  // posterior variance of the model in use
    double storage = 0.0;
    double ellipse = 0.0;  // NaN when undefined
    double lambda_k = 0.0;
    std::vector<double> uncertainties;
};

struct TraceEvent {
    double t = 0.0;
    std::string kind;
    std::string message;
};

struct Trace {
    PursuitCase pursuit_case = PursuitCase::Switched;
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::vector<TraceRecord> records;
    std::vector<TraceEvent> events;
    std::vector<Vec6> model_betas;
    bool aborted = false;
};

/// Thrown by run_scenario under the abort policy; carries the partial trace.
class ScenarioAborted : public AssumptionViolation {
public:
    ScenarioAborted(const std::string& what, Trace partial) : AssumptionViolation(what), trace(std::move(partial)) {}
    Trace trace;
};

/// Closed-loop run. `models` holds one model (single case) or one per
/// profile (switched case); it may be empty when use_gp is false.
Trace run_scenario(const Scenario& scenario, const std::vector<GpModel>& models);

/// Mean of ||e||^2 over the records.
double mse(const Trace& trace);

/// Datasets sampled on each profile's limit cycle with measurement noise.
std::vector<Dataset> generate_training(const Scenario& scenario, int per_profile);

struct TrainedModels {
    std::vector<GpModel> models;
    std::vector<FitResult> fits;
};

/// Fits one model per dataset (switched) or one on their concatenation
/// (single), then attaches beta(delta), alpha and the normalisation factor.
TrainedModels train_models(const Scenario& scenario, const std::vector<Dataset>& datasets, PursuitCase pursuit_case);

/// Attaches beta, alpha and Sigma_bar to a fitted model.
void attach_bound_terms(GpModel& model, const Scenario& scenario);

struct BoundReport {
    bool precondition_violated = false;
    std::string message;
    double lambda_tilde = 0.0;
    double lambda_k_min_observed = 0.0;
    std::optional<double> entry_time;
    double inside_fraction_post_entry = 0.0;
    double inside_fraction_post_transient = 0.0;
    double max_error_post_transient = 0.0;
};

BoundReport bound_report(const Trace& trace, const BoundParameters& params, double transient);

struct SwitchEvent {
    double t = 0.0;
    int from = 0;
    int to = 0;
};

std::vector<SwitchEvent> true_switches(const Trace& trace);
std::vector<SwitchEvent> estimated_switches(const Trace& trace);

struct SwitchingFidelity {
    int true_switches = 0;
    int matched = 0;
    int spurious = 0;             // estimated switches after the transient farther than the window from any true one
    long min_dwell_steps = -1;    // -1 when fewer than two estimated switches
    double max_detection_delay = 0.0;
};

SwitchingFidelity evaluate_switching(const Trace& trace, double window, double transient);

struct CaseComparison {
    std::uint64_t seed = 0;
    Trace single;
    Trace switched;
    double mse_single = 0.0;
    double mse_switched = 0.0;
    /// (mse_single - mse_switched) / mse_single
    double improvement = 0.0;
};

/// Generates training data for `seed`, trains the single model and the
/// per-profile models and runs both cases on the same scenario.
CaseComparison compare_cases(Scenario scenario, std::uint64_t seed);

}  // namespace vpursuit
