#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "vpursuit/errors.hpp"
#include "vpursuit/pursuit.hpp"

using namespace vpursuit;

namespace {

Eigen::Matrix4d twist_hat(const Vec6& xi) {
    Eigen::Matrix4d X = Eigen::Matrix4d::Zero();
    X.topLeftCorner<3, 3>() = wedge(xi.tail<3>());
    X.topRightCorner<3, 1>() = xi.head<3>();
    return X;
}

Pose from_matrix(const Eigen::Matrix4d& T) { return {T.topLeftCorner<3, 3>(), T.topRightCorner<3, 1>()}; }

GpModel small_model(std::mt19937_64& rng, const Vec6& center, int m) {
    Dataset d;
    d.inputs.resize(m, kGpDims);
    d.outputs.resize(m, kGpDims);
    for (int j = 0; j < m; ++j) {
        d.inputs.row(j) = (center + fixtures::random_vec6(rng, 0.3)).transpose();
        d.outputs.row(j) = fixtures::random_vec6(rng).transpose();
    }
    OutputHyperparameters hps;
    for (auto& hp : hps) {
        hp.lengthscales = Vec6::Constant(0.5);
        hp.signal_std = 1.0;
        hp.noise_std = 0.01;
    }
    return {d, hps};
}

}  // namespace

TEST(Gains, Validation) {
    EXPECT_NO_THROW(ControllerGains{}.validate());
    ControllerGains g;
    g.k_c(0, 1) = 1.0;
    EXPECT_THROW(g.validate(), InvalidArgument);
    EXPECT_THROW(ControllerGains::scalar(1.0, -1.0).validate(), InvalidArgument);
}

TEST(ErrorOutputMatrix, Structure) {
    const Mat3 R = rotation_z(0.4);
    const Mat12 N = error_output_matrix(R);
    EXPECT_EQ((N.topLeftCorner<6, 6>()), Mat6::Identity());
    EXPECT_EQ((N.topRightCorner<6, 6>()), Mat6::Zero());
    EXPECT_EQ((N.bottomRightCorner<6, 6>()), Mat6::Identity());
    EXPECT_LT((N.bottomLeftCorner<6, 6>() + adjoint(Mat3(R.transpose()))).norm(), 1e-15);
}

TEST(LambdaK, ClosedFormForScalarGains) {
    // With R = I: N^T K N = [[kc + ke, -ke], [-ke, ke]] per axis.
    const double kc = 10.0;
    const double ke = 17.0;
    const double tr = kc + 2.0 * ke;
    const double det = (kc + ke) * ke - ke * ke;
    const double expected = 0.5 * (tr - std::sqrt(tr * tr - 4.0 * det));
    EXPECT_NEAR(lambda_k(ControllerGains{}, Mat3::Identity()), expected, 1e-12);
    EXPECT_NEAR(expected, 4.28, 0.01);
}

TEST(LambdaK, InvariantUnderRotation) {
    std::mt19937_64 rng(71);
    const double ref = lambda_k(ControllerGains{}, Mat3::Identity());
    for (int i = 0; i < 20; ++i) {
        EXPECT_NEAR(lambda_k(ControllerGains{}, fixtures::random_rotation(rng)), ref, 1e-10);
    }
}

TEST(ControlErrors, Definitions) {
    std::mt19937_64 rng(72);
    const Pose g_d = Pose::from_translation({0, 2, 0});
    const Pose g_bar(fixtures::random_rotation(rng, 1.0), Vec3(0.3, 1.5, -0.2));
    const Vec6 e_e = fixtures::random_vec6(rng, 0.1);
    const ErrorState s = control_errors(g_bar, g_d, e_e);
    EXPECT_LT((s.e_c - vec_transform(compose(inverse(g_d), g_bar))).norm(), 1e-15);
    EXPECT_EQ(s.e.tail<6>(), e_e);
    EXPECT_LT((s.nu - error_output_matrix(s.g_ce.rotation()) * s.e).norm(), 1e-15);
}

TEST(ControlErrors, RotationAssumption) {
    const Pose g_bar(rotation_z(std::numbers::pi / 2 + 0.01), Vec3(0, 2, 0));
    EXPECT_THROW(control_errors(g_bar, Pose(), Vec6::Zero()), AssumptionViolation);
    EXPECT_NO_THROW(control_errors(g_bar, Pose(), Vec6::Zero(), false));
}

TEST(ControlInput, Formula) {
    std::mt19937_64 rng(73);
    const Vec12 nu = (Vec12() << fixtures::random_vec6(rng), fixtures::random_vec6(rng)).finished();
    const Mat3 R_ce = fixtures::random_rotation(rng, 1.0);
    const Mat3 R_ee = fixtures::random_rotation(rng, 0.3);
    const Vec6 mu = fixtures::random_vec6(rng);
    const ControllerGains k = ControllerGains::scalar(3.0, 5.0);
    const ControlInput u = control_input(nu, R_ce, R_ee, mu, k);
    Eigen::Matrix<double, 12, 6> A;
    A << adjoint(R_ce), Mat6::Identity();
    const Vec12 expected = -k.combined() * nu - A * adjoint(R_ee) * mu;
    EXPECT_LT((u.u_c.vector() - expected.head<6>()).norm(), 1e-13);
    EXPECT_LT((u.u_e.vector() - expected.tail<6>()).norm(), 1e-13);
}

TEST(StorageFunction, KnownValues) {
    EXPECT_EQ(storage_function(Pose(), Pose()), 0.0);
    EXPECT_DOUBLE_EQ(storage_function(Pose::from_translation({1, 0, 0}), Pose()), 0.5);
    EXPECT_NEAR(storage_function(Pose(rotation_z(std::numbers::pi / 2), Vec3::Zero()), Pose()), 1.0, 1e-15);
}

TEST(StorageFunction, PositiveAwayFromZero) {
    std::mt19937_64 rng(74);
    for (int i = 0; i < 1000; ++i) {
        const Pose a = fixtures::random_pose(rng, 1.0);
        const Pose b = fixtures::random_pose(rng, 1.0);
        EXPECT_GT(storage_function(a, b), 0.0);
    }
}

TEST(StorageFunction, RateIsSupplyPlusTargetTerm) {
    // dS/dt = nu^T u + e_e^T Ad_{R_ee} V_wo along the closed error dynamics,
    // checked with central differences of the exact flows.
    std::mt19937_64 rng(75);
    const Pose g_d = Pose::from_translation({0, 2, 0});
    for (int trial = 0; trial < 50; ++trial) {
        const Pose g_bar = compose(g_d, fixtures::random_pose(rng, 0.5, 1.0));
        const Pose g_co = compose(g_bar, fixtures::random_pose(rng, 0.3, 1.0));
        const Vec6 u_c = fixtures::random_vec6(rng);
        const Vec6 u_e = fixtures::random_vec6(rng);
        const Vec6 v_wo = fixtures::random_vec6(rng);
        const Vec6 v_wc = -adjoint(g_d) * u_c;

        auto storage_at = [&](double h) {
            const Eigen::Matrix4d Eb = (-twist_hat(v_wc) * h).exp() * g_bar.homogeneous() * (-twist_hat(u_e) * h).exp();
            const Eigen::Matrix4d Et = (-twist_hat(v_wc) * h).exp() * g_co.homogeneous() * (twist_hat(v_wo) * h).exp();
            const Pose gb = from_matrix(Eb);
            return storage_function(relative(g_d, gb), relative(gb, from_matrix(Et)));
        };
        const double h = 1e-5;
        const double rate = (storage_at(h) - storage_at(-h)) / (2.0 * h);

        const Pose g_ee = relative(g_bar, g_co);
        const ErrorState s = control_errors(g_bar, g_d, vec_transform(g_ee), false);
        Vec12 u;
        u << u_c, u_e;
        const double expected = s.nu.dot(u) + vec_transform(g_ee).dot(adjoint(g_ee.rotation()) * v_wo);
        EXPECT_NEAR(rate, expected, 1e-6 * (1.0 + std::abs(expected)));
    }
}

TEST(VmoStep, ZeroInputs) {
    std::mt19937_64 rng(76);
    const Pose g = fixtures::random_pose(rng);
    EXPECT_LT(fixtures::pose_distance(vmo_step(g, Twist(), Twist(), 0.02), g), 1e-15);
    EXPECT_THROW(vmo_step(g, Twist(), Twist(), 0.0), InvalidArgument);
}

TEST(VmoStep, CameraTranslationShiftsEstimate) {
    const Pose g = Pose::from_translation({0, 2, 0});
    const Pose next = vmo_step(g, Twist(Vec3(0.5, 0, 0), Vec3::Zero()), Twist(), 0.02);
    EXPECT_LT((next.translation() - Vec3(-0.01, 2, 0)).norm(), 1e-15);
}

TEST(VmoStep, MatchesRungeKuttaReference) {
    // Constant inputs over the step: the two-sided exponential is the exact
    // solution of X' = -V^ X - X U^; compare with fine RK4 on the matrix ODE.
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const Pose g = fixtures::random_pose(rng);
        const Vec6 v = fixtures::random_vec6(rng, 2.0);
        const Vec6 u = fixtures::random_vec6(rng, 2.0);
        const double dt = 0.02;
        const Eigen::Matrix4d V = twist_hat(v);
        const Eigen::Matrix4d U = twist_hat(u);
        auto f = [&](const Eigen::Matrix4d& X) -> Eigen::Matrix4d { return -V * X - X * U; };
        Eigen::Matrix4d X = g.homogeneous();
        const int n = 64;
        const double h = dt / n;
        for (int i = 0; i < n; ++i) {
            const Eigen::Matrix4d k1 = f(X);
            const Eigen::Matrix4d k2 = f(X + 0.5 * h * k1);
            const Eigen::Matrix4d k3 = f(X + 0.5 * h * k2);
            const Eigen::Matrix4d k4 = f(X + h * k3);
            X += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        const Pose step = vmo_step(g, Twist::from_vector(v), Twist::from_vector(u), dt);
        EXPECT_LT((step.homogeneous() - X).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(EstimateSwitching, SingleModel) {
    std::mt19937_64 rng(78);
    GpModel m = small_model(rng, Vec6::Zero(), 10);
    const GpModel* models[] = {&m};
    for (int t = 0; t < 10; ++t) {
        EXPECT_EQ(estimate_switching(models, fixtures::random_vec6(rng, 3.0), t % 2 == 0 ? -1 : 0, 0.05).selected, 0);
    }
}

TEST(EstimateSwitching, PrefersModelWithData) {
    std::mt19937_64 rng(79);
    const Vec6 c1 = Vec6::Zero();
    const Vec6 c2 = Vec6::Constant(3.0);
    GpModel m1 = small_model(rng, c1, 10);
    GpModel m2 = small_model(rng, c2, 10);
    const GpModel* models[] = {&m1, &m2};
    const Vec6 at_data = m1.dataset().inputs.row(0).transpose();
    EXPECT_EQ(estimate_switching(models, at_data, -1, 0.05).selected, 0);
    EXPECT_EQ(estimate_switching(models, at_data, 1, 0.05).selected, 0);
    const SwitchingDecision d = estimate_switching(models, m2.dataset().inputs.row(0).transpose(), 0, 0.05);
    EXPECT_EQ(d.candidate, 1);
    EXPECT_EQ(d.selected, 1);
    ASSERT_EQ(d.uncertainties.size(), 2u);
}

TEST(EstimateSwitching, TiesKeepCurrent) {
    std::mt19937_64 rng(80);
    GpModel m = small_model(rng, Vec6::Zero(), 8);
    const GpModel* models[] = {&m, &m, &m};
    for (int t = 0; t < 50; ++t) {
        const Vec6 x = fixtures::random_vec6(rng, 2.0);
        for (int current = 0; current < 3; ++current) {
            EXPECT_EQ(estimate_switching(models, x, current, 0.0).selected, current);
        }
    }
}

TEST(EstimateSwitching, HysteresisThreshold) {
    std::mt19937_64 rng(81);
    GpModel m1 = small_model(rng, Vec6::Zero(), 10);
    GpModel m2 = small_model(rng, Vec6::Constant(3.0), 10);
    m1.set_switching_weights(Vec6::Unit(1), 10.0);
    m2.set_switching_weights(Vec6::Unit(1), 10.0);
    const GpModel* models[] = {&m1, &m2};
    const Vec6 x = m2.dataset().inputs.row(0).transpose();
    const SwitchingDecision d = estimate_switching(models, x, 0, 0.0);
    const double gap = d.uncertainties[0] - d.uncertainties[1];
    ASSERT_GT(gap, 0.0);
    ASSERT_LT(gap, 0.5);
    EXPECT_EQ(estimate_switching(models, x, 0, gap * 1.01).selected, 0);
    EXPECT_EQ(estimate_switching(models, x, 0, gap * 0.99).selected, 1);
    EXPECT_THROW(estimate_switching(models, x, 0, 1.0), InvalidArgument);
    EXPECT_THROW(estimate_switching(models, x, 0, -0.1), InvalidArgument);
}

TEST(Ellipse, NominalLambdaTilde) {
    BoundParameters p;
    EXPECT_DOUBLE_EQ(p.lambda_tilde(), 2.0);
    p.mode = BoundMode::WorstCase;
    EXPECT_DOUBLE_EQ(p.lambda_tilde(), 10.0);
}

TEST(Ellipse, OriginOnBoundary) {
    // The ellipse passes through e = 0: E(0) = sqrt(r) c - sqrt(r) c.
    const BoundParameters p;
    const EllipseValue v = ellipse_membership(Vec6::Zero(), Vec6::Zero(), p, Vec6::Constant(2.0), Vec6::Constant(0.01));
    EXPECT_NEAR(v.value, 0.0, 1e-15);
    EXPECT_TRUE(v.inside);
}

TEST(Ellipse, FarSideOfEstimationAxis) {
    const BoundParameters p;
    const Vec6 beta = Vec6::Constant(3.0);
    const Vec6 var = Vec6::Constant(0.04);
    const double c = weighted_std_norm(beta, var) / (2.0 * p.lambda_tilde());
    Vec6 e_e = Vec6::Zero();
    e_e(2) = 2.0 * c;
    const EllipseValue v = ellipse_membership(Vec6::Zero(), e_e, p, beta, var);
    EXPECT_NEAR(v.value, 0.0, 1e-15);
    EXPECT_NEAR(v.radius, c, 1e-15);
    e_e(2) = c;
    EXPECT_LT(ellipse_membership(Vec6::Zero(), e_e, p, beta, var).value, 0.0);
    e_e(2) = 2.5 * c;
    EXPECT_FALSE(ellipse_membership(Vec6::Zero(), e_e, p, beta, var).inside);
}

TEST(Ellipse, ClosedForm) {
    BoundParameters p;
    p.lambda_k = 10.0;
    p.lipschitz = 6.0;
    Vec6 e_c = Vec6::Zero();
    e_c(0) = 0.3;
    Vec6 e_e = Vec6::Zero();
    e_e(1) = 0.4;
    const Vec6 beta = Vec6::Unit(1) * 8.0;
    const Vec6 var = Vec6::Constant(0.25);
    const double c = 8.0 * 0.5 / 8.0;
    const double r = 4.0 / 10.0;
    const double expected = std::sqrt(0.09 + r * (0.4 - c) * (0.4 - c)) - std::sqrt(r) * c;
    EXPECT_NEAR(ellipse_membership(e_c, e_e, p, beta, var).value, expected, 1e-15);
}

TEST(Ellipse, PerModelEqualsAxisKnownWithoutRotationalConstant) {
    std::mt19937_64 rng(82);
    BoundParameters a;
    BoundParameters b;
    b.mode = BoundMode::PerModel;
    b.lipschitz_p = a.lipschitz;
    b.lipschitz_theta = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Vec6 e_c = fixtures::random_vec6(rng, 0.2);
        const Vec6 e_e = fixtures::random_vec6(rng, 0.2);
        const Vec6 beta = fixtures::random_vec6(rng, 5.0).cwiseAbs();
        const Vec6 var = fixtures::random_vec6(rng, 0.1).cwiseAbs();
        EXPECT_EQ(ellipse_membership(e_c, e_e, a, beta, var).value, ellipse_membership(e_c, e_e, b, beta, var).value);
    }
}

TEST(Ellipse, WorstCase) {
    BoundParameters p;
    p.mode = BoundMode::WorstCase;
    p.rho_bar = 2.0;
    const double c = 2.0 / 20.0;
    Vec6 e_e = Vec6::Zero();
    e_e(0) = 2.0 * c;
    EXPECT_NEAR(ellipse_membership(Vec6::Zero(), e_e, p, Vec6::Zero(), Vec6::Zero()).value, 0.0, 1e-15);
    EXPECT_NEAR(ellipse_membership(Vec6::Zero(), Vec6::Zero(), p, Vec6::Zero(), Vec6::Zero()).value, 0.0, 1e-15);
    Vec6 e_c = Vec6::Zero();
    e_c(3) = 0.05;
    EXPECT_FALSE(ellipse_membership(e_c, Vec6::Zero(), p, Vec6::Zero(), Vec6::Zero()).inside);
}

TEST(Ellipse, PreconditionViolation) {
    BoundParameters p;
    p.lipschitz = 10.0;
    EXPECT_THROW(ellipse_membership(Vec6::Zero(), Vec6::Zero(), p, Vec6::Ones(), Vec6::Ones()), PreconditionViolation);
}

TEST(BoundMode, ParseRoundTrip) {
    for (BoundMode m : {BoundMode::WorstCase, BoundMode::PerModel, BoundMode::AxisKnown}) {
        EXPECT_EQ(parse_bound_mode(to_string(m)), m);
    }
    EXPECT_THROW(parse_bound_mode("nope"), InvalidArgument);
}

TEST(Lipschitz, ConstantFieldIsZero) {
    std::mt19937_64 rng(83);
    std::vector<std::pair<Vec6, Vec6>> pairs;
    for (int i = 0; i < 100; ++i) {
        pairs.emplace_back(fixtures::random_vec6(rng), fixtures::random_vec6(rng));
    }
    EXPECT_EQ(empirical_lipschitz([](const Vec6&) { return Vec6::Ones().eval(); }, pairs), 0.0);
    EXPECT_THROW(empirical_lipschitz([](const Vec6& x) { return x; }, {}), InvalidArgument);
}

TEST(Lipschitz, AffineFieldApproachesOperatorNorm) {
    std::mt19937_64 rng(84);
    Mat6 A;
    for (int r = 0; r < 6; ++r) {
        A.row(r) = fixtures::random_vec6(rng).transpose();
    }
    const double op = Eigen::JacobiSVD<Mat6>(A).singularValues()(0);
    std::vector<std::pair<Vec6, Vec6>> pairs;
    for (int i = 0; i < 20000; ++i) {
        pairs.emplace_back(fixtures::random_vec6(rng), fixtures::random_vec6(rng));
    }
    const double est = empirical_lipschitz([&](const Vec6& x) { return (A * x).eval(); }, pairs);
    EXPECT_LE(est, op * (1.0 + 1e-12));
    EXPECT_GT(est, 0.9 * op);
}

TEST(Lipschitz, AnalyticBoundsGpMean) {
    std::mt19937_64 rng(85);
    const GpModel m = small_model(rng, Vec6::Zero(), 15);
    const Vec6 L = analytic_lipschitz(m);
    std::vector<std::pair<Vec6, Vec6>> pairs;
    for (int i = 0; i < 2000; ++i) {
        const Vec6 x = fixtures::random_vec6(rng, 0.5);
        pairs.emplace_back(x, x + fixtures::random_vec6(rng, 0.05));
    }
    for (int i = 0; i < kGpDims; ++i) {
        const double emp = empirical_lipschitz([&](const Vec6& x) { return Vec6::Constant(m.mean(x)(i)); }, pairs) /
                           std::sqrt(6.0);
        EXPECT_LE(emp, L(i));
    }
}
