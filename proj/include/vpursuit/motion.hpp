#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vpursuit/geometry.hpp"
#include "vpursuit/gp.hpp"

namespace vpursuit {

/// Pose-dependent body-velocity field followed by the target while active.
class MotionProfile {
public:
    virtual ~MotionProfile() = default;
    /// Body velocity at the vector-form pose [p; xi*theta].
    virtual Twist velocity(const Vec6& g_check) const = 0;
    virtual std::string describe() const = 0;

    Twist velocity(const Pose& g) const { return velocity(g.vector_form()); }
};

using ProfilePtr = std::shared_ptr<const MotionProfile>;

/// Planar flow a(p) of a Van der Pol oscillator with stiffness eta and speed v.
Vec3 vanderpol_flow(const Vec3& p, double eta, double v);

/// Body velocity of a target heading along the Van der Pol flow: linear part
/// R^T a(p), angular part the rate of the flow direction about +z (zero at
/// the equilibrium).
Twist vanderpol_velocity(const Vec6& g_check, double eta, double v);

/// Heading angle (about +z, measured from +y) that aligns the body +y axis with a.
double flow_heading(const Vec3& a);

class VanDerPolProfile final : public MotionProfile {
public:
    VanDerPolProfile(double eta, double v) : eta_(eta), v_(v) {}
    Twist velocity(const Vec6& g_check) const override { return vanderpol_velocity(g_check, eta_, v_); }
    std::string describe() const override;
    double eta() const { return eta_; }
    double speed() const { return v_; }

private:
    double eta_;
    double v_;
};

class StationaryProfile final : public MotionProfile {
public:
    Twist velocity(const Vec6&) const override { return {}; }
    std::string describe() const override { return "stationary"; }
};

/// Body velocity tabulated on a regular planar (x, y) grid, bilinearly
/// interpolated and clamped at the border.
class TabulatedProfile final : public MotionProfile {
public:
    /// CSV header: x,y,vx,vy,vz,wx,wy,wz; rows must fill a regular grid.
    static TabulatedProfile load_csv(const std::filesystem::path& path);
    TabulatedProfile(std::vector<double> xs, std::vector<double> ys, std::vector<Vec6> values);

    Twist velocity(const Vec6& g_check) const override;
    std::string describe() const override { return "tabulated"; }

private:
    std::vector<double> xs_;
    std::vector<double> ys_;
    std::vector<Vec6> values_;  // row-major in y, i.e. index iy * nx + ix
};

/// One step of length h of g' = g V(g)^ (Runge-Kutta stages composed through exp).
Pose integrate_profile(const Pose& g, const MotionProfile& profile, double h);

struct Trigger {
    enum class Kind { Time, Position };
    Kind kind = Kind::Position;
    double time = 0.0;
    Vec3 position = Vec3::Zero();
    double tolerance = 0.05;
    double rearm_radius = 0.1;
    int profile = 1;  // 1-based, as in the scenario file
};

struct SwitchSchedule {
    int initial_profile = 1;
    std::vector<Trigger> triggers;
};

/// Stateful evaluator of the switching signal s(t). Time triggers fire once
/// (left-closed); position triggers fire on entering the tolerance ball and
/// re-arm only after leaving the re-arm shell.
class SwitchingSignal {
public:
    explicit SwitchingSignal(SwitchSchedule schedule);

    int update(double t, const Pose& g_wo, int current);
    int initial() const { return schedule_.initial_profile; }
    const SwitchSchedule& schedule() const { return schedule_; }

private:
    SwitchSchedule schedule_;
    std::vector<bool> armed_;
};

/// y = V(x) + eps with eps ~ N(0, diag(noise_std^2)), deterministic per seed.
Dataset sample_training_data(const MotionProfile& profile, std::span<const Vec6> inputs, const Vec6& noise_std,
                             std::uint64_t seed);

struct LimitCycle {
    double period = 0.0;
    std::vector<Pose> samples;
};

/// Runs the profile alone from `start` (burn-in, then one period detected with
/// a Poincare section) and returns `count` poses equispaced in time.
LimitCycle sample_limit_cycle(const MotionProfile& profile, const Pose& start, int count, double burn_in = 60.0,
                              double step = 2e-3);

}  // namespace vpursuit
