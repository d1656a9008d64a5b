#include "vpursuit/motion.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "vpursuit/errors.hpp"

namespace vpursuit {

Vec3 vanderpol_flow(const Vec3& p, double eta, double v) {
    return {v * p.y(), -v * p.x() + v * eta * (1.0 - p.x() * p.x()) * p.y(), 0.0};
}

double flow_heading(const Vec3& a) { return std::atan2(-a.x(), a.y()); }

namespace {

/// [a, b] in se(3) for twists ordered (v, omega).
Vec6 twist_bracket(const Vec6& a, const Vec6& b) {
    Vec6 out;
    out << a.tail<3>().cross(b.head<3>()) + a.head<3>().cross(b.tail<3>()), a.tail<3>().cross(b.tail<3>());
    return out;
}

}  // namespace

Twist vanderpol_velocity(const Vec6& g_check, double eta, double v) {
    const Vec3 p = g_check.head<3>();
    const Mat3 R = exp_so3(g_check.tail<3>());
    const Vec3 a = vanderpol_flow(p, eta, v);

    // da/dt along the flow, (d a / d p) a.
    const double dax = v * a.y();
    const double day = (-v - 2.0 * v * eta * p.x() * p.y()) * a.x() + v * eta * (1.0 - p.x() * p.x()) * a.y();
    const double speed_sq = a.x() * a.x() + a.y() * a.y();
    double omega = 0.0;
    if (speed_sq > 1e-24) {
        omega = (a.x() * day - dax * a.y()) / speed_sq;
    }
    return {R.transpose() * a, Vec3(0.0, 0.0, omega)};
}

std::string VanDerPolProfile::describe() const {
    std::ostringstream os;
    os << "vanderpol(eta=" << eta_ << ", v=" << v_ << ")";
    return os.str();
}

TabulatedProfile::TabulatedProfile(std::vector<double> xs, std::vector<double> ys, std::vector<Vec6> values)
    : xs_(std::move(xs)), ys_(std::move(ys)), values_(std::move(values)) {
    if (xs_.size() < 2 || ys_.size() < 2 || values_.size() != xs_.size() * ys_.size()) {
        throw InvalidArgument("tabulated profile needs a regular grid of at least 2 x 2 points");
    }
    if (!std::is_sorted(xs_.begin(), xs_.end()) || !std::is_sorted(ys_.begin(), ys_.end())) {
        throw InvalidArgument("tabulated profile grid axes must be increasing");
    }
}

TabulatedProfile TabulatedProfile::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingArtifact("cannot open tabulated profile " + path.string());
    }
    std::string line;
    std::getline(in, line);
    std::map<std::pair<double, double>, Vec6> cells;
    std::vector<double> xs;
    std::vector<double> ys;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double x = 0.0;
        double y = 0.0;
        Vec6 v;
        if (!(row >> x >> y >> v(0) >> v(1) >> v(2) >> v(3) >> v(4) >> v(5))) {
            throw InvalidArgument("malformed row in " + path.string() + ": " + line);
        }
        cells[{y, x}] = v;
        xs.push_back(x);
        ys.push_back(y);
    }
    auto unique_sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    xs = unique_sorted(xs);
    ys = unique_sorted(ys);
    std::vector<Vec6> values;
    values.reserve(xs.size() * ys.size());
    for (double y : ys) {
        for (double x : xs) {
            auto it = cells.find({y, x});
            if (it == cells.end()) {
                throw InvalidArgument("tabulated profile " + path.string() + " is not a full grid");
            }
            values.push_back(it->second);
        }
    }
    return {std::move(xs), std::move(ys), std::move(values)};
}

Twist TabulatedProfile::velocity(const Vec6& g_check) const {
    auto locate = [](const std::vector<double>& axis, double q, std::size_t& i0, double& frac) {
        q = std::clamp(q, axis.front(), axis.back());
        auto it = std::upper_bound(axis.begin(), axis.end(), q);
        std::size_t hi = static_cast<std::size_t>(std::distance(axis.begin(), it));
        hi = std::clamp<std::size_t>(hi, 1, axis.size() - 1);
        i0 = hi - 1;
        frac = (q - axis[i0]) / (axis[hi] - axis[i0]);
    };
    std::size_t ix = 0;
    std::size_t iy = 0;
    double fx = 0.0;
    double fy = 0.0;
    locate(xs_, g_check(0), ix, fx);
    locate(ys_, g_check(1), iy, fy);
    const std::size_t nx = xs_.size();
    const Vec6 v = (1.0 - fx) * (1.0 - fy) * values_[iy * nx + ix] + fx * (1.0 - fy) * values_[iy * nx + ix + 1] +
                   (1.0 - fx) * fy * values_[(iy + 1) * nx + ix] + fx * fy * values_[(iy + 1) * nx + ix + 1];
    return Twist::from_vector(v);
}

Pose integrate_profile(const Pose& g, const MotionProfile& profile, double h) {
    // Munthe-Kaas RK4 on g = g0 exp(theta), theta' = dexp^{-1}_{-theta}(xi).
    auto stage = [&](const Vec6& theta) {
        const Vec6 xi = profile.velocity(compose(g, exp_se3(Twist::from_vector(theta), 1.0))).vector();
        const Vec6 b = twist_bracket(theta, xi);
        return (xi + 0.5 * b + twist_bracket(theta, b) / 12.0).eval();
    };
    const Vec6 k1 = h * profile.velocity(g).vector();
    const Vec6 k2 = h * stage(0.5 * k1);
    const Vec6 k3 = h * stage(0.5 * k2);
    const Vec6 k4 = h * stage(k3);
    return compose(g, exp_se3(Twist::from_vector((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0), 1.0));
}

SwitchingSignal::SwitchingSignal(SwitchSchedule schedule)
    : schedule_(std::move(schedule)), armed_(schedule_.triggers.size(), true) {}

int SwitchingSignal::update(double t, const Pose& g_wo, int current) {
    if (t < 0.0) {
        throw InvalidArgument("switching signal evaluated at negative time");
    }
    int next = current;
    for (std::size_t k = 0; k < schedule_.triggers.size(); ++k) {
        const Trigger& trig = schedule_.triggers[k];
        if (trig.kind == Trigger::Kind::Time) {
            if (armed_[k] && t >= trig.time - 1e-9) {
                armed_[k] = false;
                next = trig.profile;
            }
            continue;
        }
        const double dist = (g_wo.translation() - trig.position).norm();
        if (armed_[k] && dist < trig.tolerance) {
            armed_[k] = false;
            next = trig.profile;
        } else if (!armed_[k] && dist > trig.rearm_radius) {
            armed_[k] = true;
        }
    }
    return next;
}

Dataset sample_training_data(const MotionProfile& profile, std::span<const Vec6> inputs, const Vec6& noise_std,
                             std::uint64_t seed) {
    Dataset data;
    const auto m = static_cast<Eigen::Index>(inputs.size());
    data.inputs.resize(m, kGpDims);
    data.outputs.resize(m, kGpDims);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Vec6& x = inputs[static_cast<std::size_t>(j)];
        data.inputs.row(j) = x.transpose();
        Vec6 y = profile.velocity(x).vector();
        for (int i = 0; i < kGpDims; ++i) {
            const double n = normal(rng);
            y(i) += noise_std(i) * n;
        }
        data.outputs.row(j) = y.transpose();
    }
    return data;
}

LimitCycle sample_limit_cycle(const MotionProfile& profile, const Pose& start, int count, double burn_in,
                              double step) {
    if (count < 1) {
        throw InvalidArgument("sample_limit_cycle: count must be positive");
    }
    Pose g = start;
    const auto burn_steps = static_cast<long>(std::ceil(burn_in / step));
    for (long k = 0; k < burn_steps; ++k) {
        g = integrate_profile(g, profile, step);
    }
    const Pose origin = g;
    const Vec3 p0 = origin.translation();
    const Vec3 dir = origin.rotation() * profile.velocity(origin).linear;
    if (dir.norm() < 1e-9) {
        throw InvalidArgument("sample_limit_cycle: profile is at rest after burn-in");
    }
    const Vec3 d = dir.normalized();

    // Poincare section through p0 normal to the flow; the orbit returns when
    // the signed distance crosses zero upwards after having gone negative.
    double period = 0.0;
    bool went_back = false;
    double s_prev = 0.0;
    double t = 0.0;
    const double max_time = 1000.0;
    while (t < max_time) {
        g = integrate_profile(g, profile, step);
        t += step;
        const double s = (g.translation() - p0).dot(d);
        if (s < 0.0) {
            went_back = true;
        } else if (went_back && s_prev < 0.0) {
            period = t - step + step * (-s_prev) / (s - s_prev);
            break;
        }
        s_prev = s;
    }
    if (period <= 0.0) {
        throw InvalidArgument("sample_limit_cycle: no periodic orbit found");
    }

    LimitCycle cycle;
    cycle.period = period;
    const double spacing = period / count;
    const int substeps = static_cast<int>(std::ceil(spacing / step));
    const double h = spacing / substeps;
    g = origin;
    cycle.samples.push_back(g);
    for (int k = 1; k < count; ++k) {
        for (int s = 0; s < substeps; ++s) {
            g = integrate_profile(g, profile, h);
        }
        cycle.samples.push_back(g);
    }
    return cycle;
}

}  // namespace vpursuit
