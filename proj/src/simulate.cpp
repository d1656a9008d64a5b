#include "vpursuit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "vpursuit/errors.hpp"

namespace vpursuit {
namespace {

constexpr long kReorthonormalizeEvery = 1000;

std::string format_time(double t) {
    std::ostringstream os;
    os << t;
    return os.str();
}

}  // namespace

PursuitCase parse_case(const std::string& name) {
    if (name == "single" || name == "1") {
        return PursuitCase::Single;
    }
    if (name == "switched" || name == "2") {
        return PursuitCase::Switched;
    }
    throw InvalidArgument("unknown case '" + name + "' (expected single or switched)");
}

std::string to_string(PursuitCase c) { return c == PursuitCase::Single ? "single" : "switched"; }

std::vector<Vec6> Domain::grid(int nx, int ny, int n_heading) const {
    std::vector<Vec6> out;
    out.reserve(static_cast<std::size_t>(nx * ny * n_heading));
    for (int i = 0; i < nx; ++i) {
        const double x = nx == 1 ? x_min : x_min + (x_max - x_min) * i / (nx - 1);
        for (int j = 0; j < ny; ++j) {
            const double y = ny == 1 ? y_min : y_min + (y_max - y_min) * j / (ny - 1);
            for (int k = 0; k < n_heading; ++k) {
                // Headings in (-pi, pi]; the vector form keeps theta in [0, pi].
                const double heading = -std::numbers::pi + 2.0 * std::numbers::pi * (k + 1) / n_heading;
                Vec6 g;
                g << x, y, 0.0, Pose::from_vector_form(Vec3::Zero(), Vec3(0.0, 0.0, heading)).vector_form().tail<3>();
                out.push_back(g);
            }
        }
    }
    return out;
}

Scenario Scenario::nominal() {
    Scenario s;
    s.profiles = {std::make_shared<VanDerPolProfile>(0.5, 1.0), std::make_shared<VanDerPolProfile>(1.5, 0.5)};
    s.schedule.initial_profile = 1;
    Trigger to_two;
    to_two.position = Vec3(2.0, 0.0, 0.0);
    to_two.profile = 2;
    Trigger to_one;
    to_one.position = Vec3(-2.0, 0.0, 0.0);
    to_one.profile = 1;
    s.schedule.triggers = {to_two, to_one};
    return s;
}

void Scenario::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ConfigError("dt must be positive");
    }
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw ConfigError("duration must be positive");
    }
    if (profiles.empty()) {
        throw ConfigError("at least one motion profile is required");
    }
    const int n = static_cast<int>(profiles.size());
    if (schedule.initial_profile < 1 || schedule.initial_profile > n) {
        throw ConfigError("initial profile out of range");
    }
    for (const auto& trig : schedule.triggers) {
        if (trig.profile < 1 || trig.profile > n) {
            throw ConfigError("trigger refers to an unknown profile");
        }
        if (trig.kind == Trigger::Kind::Position && !(trig.tolerance > 0.0 && trig.rearm_radius > trig.tolerance)) {
            throw ConfigError("position trigger needs 0 < tolerance < rearm radius");
        }
    }
    for (const Pose* g : {&g_wo0, &g_wc0, &g_bar_co0, &g_d}) {
        if (!is_rotation(g->rotation())) {
            throw ConfigError("initial pose has an invalid rotation");
        }
    }
    if (!(threshold >= 0.0 && threshold < 1.0)) {
        throw ConfigError("switching threshold T must lie in [0, 1)");
    }
    if (!(bounds.delta > 0.0 && bounds.delta < 1.0)) {
        throw ConfigError("delta must lie in (0, 1)");
    }
    if (target_substeps < 1) {
        throw ConfigError("target_substeps must be at least 1");
    }
    if (pixel_noise_std < 0.0) {
        throw ConfigError("pixel noise must be non-negative");
    }
    if (training.points_per_profile < 2) {
        throw ConfigError("training needs at least 2 points per profile");
    }
    if (!(domain.x_max > domain.x_min && domain.y_max > domain.y_min)) {
        throw ConfigError("domain bounds are empty");
    }
    try {
        gains.validate();
        features.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

long Scenario::steps() const { return std::lround(duration / dt); }

Trace run_scenario(const Scenario& scenario, const std::vector<GpModel>& models) {
    scenario.validate();
    const bool single = scenario.pursuit_case == PursuitCase::Single;
    if (scenario.use_gp) {
        if (models.empty()) {
            throw InvalidArgument("run_scenario: GP feed-forward requested but no models given");
        }
        if (single && models.size() != 1) {
            throw InvalidArgument("run_scenario: the single case takes exactly one model");
        }
    }

    Trace trace;
    trace.pursuit_case = scenario.pursuit_case;
    trace.seed = scenario.seed;
    trace.dt = scenario.dt;
    for (const auto& m : models) {
        trace.model_betas.push_back(m.beta());
    }
    std::vector<const GpModel*> model_ptrs;
    for (const auto& m : models) {
        model_ptrs.push_back(&m);
    }

    const bool abort = scenario.on_violation == ViolationPolicy::Abort;
    auto raise = [&](double t, const std::string& kind, const std::string& msg) {
        trace.events.push_back({t, kind, msg});
        if (abort) {
            trace.aborted = true;
            throw ScenarioAborted(kind + " at t=" + format_time(t) + ": " + msg, trace);
        }
    };

    SwitchingSignal signal(scenario.schedule);
    std::mt19937_64 pixel_rng(scenario.seed ^ 0xA5A5A5A5ULL);
    std::normal_distribution<double> pixel_noise(0.0, 1.0);

    Pose g_wo = scenario.g_wo0;
    Pose g_wc = scenario.g_wc0;
    Pose g_bar_co = scenario.g_bar_co0;
    int psi_true = scenario.schedule.initial_profile;
    int psi_est = -1;  // 0-based once initialised
    bool ellipse_reported = false;
    Vec6 e_e_measured = Vec6::Zero();

    const long steps = scenario.steps();
    trace.records.reserve(static_cast<std::size_t>(steps + 1));
    for (long k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * scenario.dt;
        psi_true = signal.update(t, g_wo, psi_true);

        // Visual measurement residual and recovered estimation error.
        const Pose g_co = relative(g_wc, g_wo);
        try {
            Eigen::VectorXd f = visual_measurement(g_co, scenario.features);
            if (scenario.pixel_noise_std > 0.0) {
                for (Eigen::Index i = 0; i < f.size(); ++i) {
                    f(i) += scenario.pixel_noise_std * pixel_noise(pixel_rng);
                }
            }
            const Eigen::VectorXd f_e = f - visual_measurement(g_bar_co, scenario.features);
            e_e_measured = recover_estimation_error(f_e, image_jacobian(g_bar_co, scenario.features));
        } catch (const FeatureBehindCamera& e) {
            raise(t, "feature_behind_camera", e.what());
            e_e_measured = Vec6::Zero();
        } catch (const DegenerateView& e) {
            raise(t, "degenerate_view", e.what());
            e_e_measured = Vec6::Zero();
        }

        // Switching estimation on the estimated target pose.
        const Vec6 x_bar = compose(g_wc, g_bar_co).vector_form();
        std::vector<double> uncertainties;
        if (scenario.use_gp && !single && models.size() > 1) {
            const auto d = estimate_switching(model_ptrs, x_bar, psi_est, scenario.threshold);
            psi_est = d.selected;
            uncertainties = d.uncertainties;
        } else {
            psi_est = 0;
            if (scenario.use_gp) {
                uncertainties.push_back(normalized_uncertainty(models.front(), x_bar));
            }
        }

        ErrorState errs = control_errors(g_bar_co, scenario.g_d, e_e_measured, false);
        if (rotation_angle(errs.g_ce.rotation()) >= 0.5 * std::numbers::pi) {
            raise(t, "assumption_violation", "control rotation error reached pi/2");
        }
        Vec3 w_ee = e_e_measured.tail<3>();
        if (w_ee.norm() > 1.0) {
            raise(t, "assumption_violation", "recovered estimation rotation error beyond pi/2");
            w_ee.normalize();
        }
        const Mat3 R_ee = rotation_from_small_error(w_ee);

        Posterior post{Vec6::Zero(), Vec6::Zero()};
        if (scenario.use_gp) {
            post = models[static_cast<std::size_t>(psi_est)].posterior(x_bar);
        }
        const ControlInput u = control_input(errs.nu, errs.g_ce.rotation(), R_ee, post.mean, scenario.gains);
        const Twist V_wc = Twist::from_vector(-adjoint(scenario.g_d) * u.u_c.vector());

        // Ground-truth errors for the record.
        const Pose g_ee = relative(g_bar_co, g_co);
        if (rotation_angle(g_ee.rotation()) >= 0.5 * std::numbers::pi) {
            raise(t, "assumption_violation", "estimation rotation error reached pi/2");
        }
        TraceRecord rec;
        rec.t = t;
        rec.psi_true = psi_true;
        rec.psi_est = psi_est + 1;
        rec.g_wo = g_wo;
        rec.g_wc = g_wc;
        rec.g_bar_co = g_bar_co;
        rec.e_c = errs.e_c;
        rec.e_e = vec_transform(g_ee);
        rec.e_e_measured = e_e_measured;
        rec.e_norm = std::sqrt(rec.e_c.squaredNorm() + rec.e_e.squaredNorm());
        rec.nu = errs.nu;
        rec.u << u.u_c.vector(), u.u_e.vector();
        rec.variance = post.variance;
        rec.storage = storage_function(errs.g_ce, g_ee);
        rec.lambda_k = lambda_k(scenario.gains, errs.g_ce.rotation());
        rec.uncertainties = std::move(uncertainties);
        rec.ellipse = std::numeric_limits<double>::quiet_NaN();
        if (scenario.use_gp || scenario.bounds.mode == BoundMode::WorstCase) {
            try {
                const Vec6 beta = scenario.use_gp ? models[static_cast<std::size_t>(psi_est)].beta() : Vec6::Zero();
                rec.ellipse = ellipse_membership(rec.e_c, rec.e_e, scenario.bounds, beta, post.variance).value;
            } catch (const PreconditionViolation& e) {
                if (!ellipse_reported) {
                    trace.events.push_back({t, "bound_precondition", e.what()});
                    ellipse_reported = true;
                }
            }
        }
        trace.records.push_back(std::move(rec));
        if (k == steps) {
            break;
        }

        // Advance the plant (target finer than the control rate) and the observer.
        const ProfilePtr& profile = scenario.profiles[static_cast<std::size_t>(psi_true - 1)];
        const double h = scenario.dt / scenario.target_substeps;
        for (int s = 0; s < scenario.target_substeps; ++s) {
            g_wo = integrate_profile(g_wo, *profile, h);
        }
        g_wc = compose(g_wc, exp_se3(V_wc, scenario.dt));
        g_bar_co = vmo_step(g_bar_co, V_wc, u.u_e, scenario.dt);
        if ((k + 1) % kReorthonormalizeEvery == 0) {
            g_wo = g_wo.reorthonormalized();
            g_wc = g_wc.reorthonormalized();
            g_bar_co = g_bar_co.reorthonormalized();
        }
    }
    return trace;
}

double mse(const Trace& trace) {
    if (trace.records.empty()) {
        throw InvalidArgument("mse: empty trace");
    }
    double s = 0.0;
    for (const auto& r : trace.records) {
        s += r.e_norm * r.e_norm;
    }
    return s / static_cast<double>(trace.records.size());
}

std::vector<Dataset> generate_training(const Scenario& scenario, int per_profile) {
    if (per_profile < 2) {
        throw InvalidArgument("generate_training: per_profile must be at least 2");
    }
    std::vector<Dataset> out;
    for (std::size_t p = 0; p < scenario.profiles.size(); ++p) {
        const LimitCycle cycle = sample_limit_cycle(*scenario.profiles[p], scenario.g_wo0, per_profile);
        std::vector<Vec6> inputs;
        inputs.reserve(cycle.samples.size());
        for (const auto& g : cycle.samples) {
            inputs.push_back(g.vector_form());
        }
        const std::uint64_t seed = scenario.seed * 1000003ULL + p + 1;
        out.push_back(sample_training_data(*scenario.profiles[p], inputs, scenario.training.noise_std, seed));
    }
    return out;
}

void attach_bound_terms(GpModel& model, const Scenario& scenario) {
    model.set_beta(beta(model, scenario.bounds.delta), scenario.bounds.delta);
    const std::vector<Vec6> samples = scenario.domain.grid(25, 25, 16);
    model.set_switching_weights(scenario.alpha, normalization_factor(model, scenario.alpha, samples));
}

TrainedModels train_models(const Scenario& scenario, const std::vector<Dataset>& datasets, PursuitCase pursuit_case) {
    if (datasets.empty()) {
        throw InvalidArgument("train_models: no datasets");
    }
    std::vector<Dataset> parts = datasets;
    if (pursuit_case == PursuitCase::Single) {
        parts = {Dataset::concatenate(datasets)};
    }
    TrainedModels out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::uint64_t seed = scenario.seed * 7919ULL + i + (pursuit_case == PursuitCase::Single ? 101 : 1);
        FitResult fit = fit_hyperparameters(parts[i], seed, scenario.training.fit);
        GpModel model(parts[i], fit.hyperparameters);
        attach_bound_terms(model, scenario);
        out.models.push_back(std::move(model));
        out.fits.push_back(std::move(fit));
    }
    return out;
}

BoundReport bound_report(const Trace& trace, const BoundParameters& params, double transient) {
    BoundReport rep;
    rep.lambda_tilde = params.lambda_tilde();
    rep.lambda_k_min_observed = std::numeric_limits<double>::infinity();
    for (const auto& r : trace.records) {
        rep.lambda_k_min_observed = std::min(rep.lambda_k_min_observed, r.lambda_k);
    }
    if (params.mode != BoundMode::WorstCase && !(rep.lambda_tilde > 0.0)) {
        rep.precondition_violated = true;
        rep.message = "lambda_K - L = " + std::to_string(rep.lambda_tilde) + " <= 0; ellipse undefined";
        return rep;
    }
    long post_entry = 0;
    long post_entry_inside = 0;
    long post_transient = 0;
    long post_transient_inside = 0;
    for (const auto& r : trace.records) {
        const int model = std::max(r.psi_est - 1, 0);
        const Vec6 beta = static_cast<std::size_t>(model) < trace.model_betas.size()
                              ? trace.model_betas[static_cast<std::size_t>(model)]
                              : Vec6::Zero();
        const bool inside = ellipse_membership(r.e_c, r.e_e, params, beta, r.variance).inside;
        if (inside && !rep.entry_time) {
            rep.entry_time = r.t;
        }
        if (rep.entry_time) {
            ++post_entry;
            post_entry_inside += inside ? 1 : 0;
        }
        if (r.t >= transient - 1e-9) {
            ++post_transient;
            post_transient_inside += inside ? 1 : 0;
            rep.max_error_post_transient = std::max(rep.max_error_post_transient, r.e_norm);
        }
    }
    if (post_entry > 0) {
        rep.inside_fraction_post_entry = static_cast<double>(post_entry_inside) / static_cast<double>(post_entry);
    }
    if (post_transient > 0) {
        rep.inside_fraction_post_transient =
            static_cast<double>(post_transient_inside) / static_cast<double>(post_transient);
    }
    return rep;
}

namespace {

std::vector<SwitchEvent> switches(const Trace& trace, bool estimated) {
    std::vector<SwitchEvent> out;
    for (std::size_t k = 1; k < trace.records.size(); ++k) {
        const int prev = estimated ? trace.records[k - 1].psi_est : trace.records[k - 1].psi_true;
        const int cur = estimated ? trace.records[k].psi_est : trace.records[k].psi_true;
        if (cur != prev) {
            out.push_back({trace.records[k].t, prev, cur});
        }
    }
    return out;
}

}  // namespace

std::vector<SwitchEvent> true_switches(const Trace& trace) { return switches(trace, false); }
std::vector<SwitchEvent> estimated_switches(const Trace& trace) { return switches(trace, true); }

SwitchingFidelity evaluate_switching(const Trace& trace, double window, double transient) {
    const auto truth = true_switches(trace);
    const auto est = estimated_switches(trace);
    SwitchingFidelity f;
    f.true_switches = static_cast<int>(truth.size());
    for (const auto& ts : truth) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& es : est) {
            if (es.to == ts.to) {
                best = std::min(best, std::abs(es.t - ts.t));
            }
        }
        if (best <= window + 1e-9) {
            ++f.matched;
            f.max_detection_delay = std::max(f.max_detection_delay, best);
        }
    }
    for (const auto& es : est) {
        if (es.t < transient) {
            continue;
        }
        const bool near = std::any_of(truth.begin(), truth.end(),
                                      [&](const SwitchEvent& ts) { return std::abs(es.t - ts.t) <= window + 1e-9; });
        f.spurious += near ? 0 : 1;
    }
    if (est.size() >= 2 && trace.dt > 0.0) {
        double min_gap = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < est.size(); ++k) {
            min_gap = std::min(min_gap, est[k].t - est[k - 1].t);
        }
        f.min_dwell_steps = std::lround(min_gap / trace.dt);
    }
    return f;
}

CaseComparison compare_cases(Scenario scenario, std::uint64_t seed) {
    scenario.seed = seed;
    const auto datasets = generate_training(scenario, scenario.training.points_per_profile);
    const TrainedModels single = train_models(scenario, datasets, PursuitCase::Single);
    const TrainedModels switched = train_models(scenario, datasets, PursuitCase::Switched);
    CaseComparison out;
    out.seed = seed;
    scenario.pursuit_case = PursuitCase::Single;
    out.single = run_scenario(scenario, single.models);
    scenario.pursuit_case = PursuitCase::Switched;
    out.switched = run_scenario(scenario, switched.models);
    out.mse_single = mse(out.single);
    out.mse_switched = mse(out.switched);
    out.improvement = (out.mse_single - out.mse_switched) / out.mse_single;
    return out;
}

}  // namespace vpursuit
