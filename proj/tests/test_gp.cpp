#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <numbers>
#include <random>

#include "test_util.hpp"
#include "vpursuit/errors.hpp"
#include "vpursuit/gp.hpp"

using namespace vpursuit;

namespace {

// Diagonal jitter the model adds to every Gram matrix, relative to sigma_f^2.
constexpr double kJitter = 1e-10;

OutputHyperparameters uniform(const Hyperparameters& hp) {
    OutputHyperparameters all;
    all.fill(hp);
    return all;
}

Hyperparameters make_hp(double lengthscale, double sf, double sn) {
    Hyperparameters hp;
    hp.lengthscales = Vec6::Constant(lengthscale);
    hp.signal_std = sf;
    hp.noise_std = sn;
    return hp;
}

Dataset random_dataset(std::mt19937_64& rng, int m) {
    Dataset d;
    d.inputs.resize(m, kGpDims);
    d.outputs.resize(m, kGpDims);
    for (int j = 0; j < m; ++j) {
        const Vec6 x = fixtures::random_vec6(rng, 2.0);
        d.inputs.row(j) = x.transpose();
        Vec6 y;
        for (int i = 0; i < kGpDims; ++i) {
            y(i) = std::sin(x(0) + i) + 0.5 * std::cos(x(1) * x(2));
        }
        d.outputs.row(j) = y.transpose();
    }
    return d;
}

// Dense reference: K built entry by entry, solved with a full-pivot LU.
Eigen::MatrixXd reference_gram(const Eigen::MatrixXd& X, const Hyperparameters& hp) {
    const Eigen::Index m = X.rows();
    Eigen::MatrixXd K(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) {
            double r2 = 0.0;
            for (int d = 0; d < kGpDims; ++d) {
                const double diff = (X(a, d) - X(b, d)) / hp.lengthscales(d);
                r2 += diff * diff;
            }
            K(a, b) = hp.signal_std * hp.signal_std * std::exp(-0.5 * r2);
        }
    }
    return K;
}

}  // namespace

TEST(Kernel, ClosedForm) {
    Hyperparameters hp;
    hp.lengthscales << 1, 2, 3, 4, 5, 6;
    hp.signal_std = 1.5;
    const Vec6 x = Vec6::Zero();
    Vec6 x2;
    x2 << 1, 2, 3, 4, 5, 6;
    EXPECT_NEAR(kernel(x, x2, hp), 2.25 * std::exp(-3.0), 1e-15);
    EXPECT_DOUBLE_EQ(kernel(x2, x2, hp), 2.25);
}

TEST(Hyperparameters, Validation) {
    Hyperparameters hp;
    EXPECT_NO_THROW(hp.validate());
    hp.lengthscales(3) = 0.0;
    EXPECT_THROW(hp.validate(), InvalidArgument);
    hp = Hyperparameters{};
    hp.noise_std = -1.0;
    EXPECT_THROW(hp.validate(), InvalidArgument);
}

TEST(Dataset, ConcatenatePreservesRows) {
    std::mt19937_64 rng(31);
    const Dataset a = random_dataset(rng, 3);
    const Dataset b = random_dataset(rng, 4);
    const Dataset c = Dataset::concatenate({a, b});
    ASSERT_EQ(c.size(), 7);
    EXPECT_EQ(c.inputs.topRows(3), a.inputs);
    EXPECT_EQ(c.outputs.bottomRows(4), b.outputs);
}

TEST(Dataset, RejectsNonFinite) {
    std::mt19937_64 rng(32);
    Dataset d = random_dataset(rng, 3);
    d.outputs(1, 2) = std::nan("");
    EXPECT_THROW(d.validate(), InvalidArgument);
}

TEST(GpModel, PriorOnEmptyData) {
    const GpModel model(Dataset{}, uniform(make_hp(0.7, 1.3, 0.1)));
    std::mt19937_64 rng(33);
    for (int i = 0; i < 10; ++i) {
        const Posterior p = model.posterior(fixtures::random_vec6(rng));
        EXPECT_EQ(p.mean, Vec6::Zero());
        for (int d = 0; d < kGpDims; ++d) {
            EXPECT_DOUBLE_EQ(p.variance(d), 1.69);
        }
    }
}

TEST(GpModel, OnePointClosedForm) {
    Dataset d;
    d.inputs = Eigen::MatrixXd::Zero(1, kGpDims);
    d.outputs = Eigen::MatrixXd::Constant(1, kGpDims, 2.0);
    const double sf2 = 1.0;
    const double sn2 = 0.01;
    const GpModel model(d, uniform(make_hp(1.0, 1.0, 0.1)));
    Vec6 x = Vec6::Zero();
    x(0) = 0.5;
    const double k = sf2 * std::exp(-0.125);
    const double denom = sf2 * (1.0 + kJitter) + sn2;
    const Posterior p = model.posterior(x);
    for (int i = 0; i < kGpDims; ++i) {
        EXPECT_NEAR(p.mean(i), k * 2.0 / denom, 1e-12);
        EXPECT_NEAR(p.variance(i), sf2 - k * k / denom, 1e-12);
    }
}

TEST(GpModel, InterpolatesWithTinyNoise) {
    std::mt19937_64 rng(34);
    const Dataset d = random_dataset(rng, 20);
    const GpModel model(d, uniform(make_hp(1.0, 1.0, 1e-6)));
    for (Eigen::Index j = 0; j < d.size(); ++j) {
        const Posterior p = model.posterior(d.inputs.row(j).transpose());
        EXPECT_LT((p.mean - d.outputs.row(j).transpose()).cwiseAbs().maxCoeff(), 1e-3);
        EXPECT_LT(p.variance.maxCoeff(), 1e-6);
    }
}

TEST(GpModel, PosteriorMatchesDenseReference) {
    std::mt19937_64 rng(35);
    const Dataset d = random_dataset(rng, 25);
    Hyperparameters hp = make_hp(1.2, 0.9, 0.05);
    hp.lengthscales << 0.8, 1.1, 1.4, 2.0, 0.6, 3.0;
    const GpModel model(d, uniform(hp));
    Eigen::MatrixXd K = reference_gram(d.inputs, hp);
    K.diagonal().array() += hp.noise_std * hp.noise_std + kJitter * hp.signal_variance();
    const Eigen::MatrixXd Kinv = K.fullPivLu().inverse();
    for (int t = 0; t < 10; ++t) {
        const Vec6 x = fixtures::random_vec6(rng, 2.0);
        Eigen::VectorXd ks(d.size());
        for (Eigen::Index j = 0; j < d.size(); ++j) {
            ks(j) = kernel(x, d.inputs.row(j).transpose(), hp);
        }
        const Posterior p = model.posterior(x);
        for (int i = 0; i < kGpDims; ++i) {
            EXPECT_NEAR(p.mean(i), ks.dot(Kinv * d.outputs.col(i)), 1e-9);
            EXPECT_NEAR(p.variance(i), hp.signal_variance() - ks.dot(Kinv * ks), 1e-9);
        }
        EXPECT_LT((model.mean(x) - p.mean).norm(), 1e-13);
    }
}

TEST(GpModel, VarianceNeverExceedsPrior) {
    std::mt19937_64 rng(36);
    const Dataset d = random_dataset(rng, 30);
    const GpModel model(d, uniform(make_hp(0.9, 1.7, 0.02)));
    for (int t = 0; t < 2000; ++t) {
        const Posterior p = model.posterior(fixtures::random_vec6(rng, 4.0));
        EXPECT_TRUE((p.variance.array() <= 1.7 * 1.7).all());
        EXPECT_TRUE((p.variance.array() > 0.0).all());
    }
}

TEST(GpModel, LogLikelihoodMatchesDenseFormula) {
    std::mt19937_64 rng(37);
    const Dataset d = random_dataset(rng, 15);
    const Hyperparameters hp = make_hp(1.0, 1.1, 0.2);
    const GpModel model(d, uniform(hp));
    Eigen::MatrixXd K = reference_gram(d.inputs, hp);
    K.diagonal().array() += hp.noise_std * hp.noise_std + kJitter * hp.signal_variance();
    const auto lu = K.fullPivLu();
    for (int i = 0; i < kGpDims; ++i) {
        const Eigen::VectorXd y = d.outputs.col(i);
        const double expected = -0.5 * y.dot(lu.solve(y)) - 0.5 * std::log(lu.determinant()) -
                                0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
        EXPECT_NEAR(model.log_marginal_likelihood(i), expected, 1e-9);
        EXPECT_NEAR(log_marginal_likelihood(d.inputs, y, hp), expected, 1e-9);
    }
}

TEST(GpModel, InformationGainAndRkhsSurrogate) {
    std::mt19937_64 rng(38);
    const Dataset d = random_dataset(rng, 12);
    const Hyperparameters hp = make_hp(1.3, 0.8, 0.1);
    const GpModel model(d, uniform(hp));
    Eigen::MatrixXd K = reference_gram(d.inputs, hp);
    K.diagonal().array() += kJitter * hp.signal_variance();
    const double s2 = hp.noise_std * hp.noise_std;
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(12, 12) + K / s2;
    const double gamma = 0.5 * std::log(A.fullPivLu().determinant());
    Eigen::MatrixXd Kn = K;
    Kn.diagonal().array() += s2;
    const Vec6 g = model.information_gain();
    const Vec6 r = model.rkhs_norm_sq_surrogate();
    for (int i = 0; i < kGpDims; ++i) {
        EXPECT_NEAR(g(i), gamma, 1e-9);
        const Eigen::VectorXd y = d.outputs.col(i);
        EXPECT_NEAR(r(i), y.dot(Kn.fullPivLu().solve(y)), 1e-9);
    }
}

TEST(GpModel, IllConditionedThrows) {
    Dataset d;
    d.inputs = Eigen::MatrixXd::Zero(2, kGpDims);
    d.outputs = Eigen::MatrixXd::Zero(2, kGpDims);
    Hyperparameters hp = make_hp(1.0, 1.0, 1e-300);
    hp.signal_std = 1e-200;
    EXPECT_THROW(GpModel(d, uniform(hp)), IllConditionedModel);
}

TEST(Beta, ClosedForm) {
    const double l = std::log(31.0 / 0.05);
    EXPECT_NEAR(beta_coefficient(4.0, 2.0, 30, 0.05), std::sqrt(8.0 + 600.0 * l * l * l), 1e-9);
    EXPECT_DOUBLE_EQ(beta_coefficient(0.0, 0.0, 30, 0.05), 0.0);
    EXPECT_THROW(beta_coefficient(1.0, 1.0, 30, 0.0), InvalidArgument);
    EXPECT_THROW(beta_coefficient(1.0, 1.0, 30, 1.0), InvalidArgument);
}

TEST(Beta, GrowsAsDeltaShrinks) {
    std::mt19937_64 rng(39);
    const GpModel model(random_dataset(rng, 10), uniform(make_hp(1.0, 1.0, 0.1)));
    const Vec6 loose = beta(model, 0.5);
    const Vec6 tight = beta(model, 0.01);
    EXPECT_TRUE((tight.array() > loose.array()).all());
    EXPECT_TRUE((loose.array() >= 0.0).all());
}

TEST(NormalizationFactor, EmptyModelIsPriorStd) {
    const GpModel model(Dataset{}, uniform(make_hp(1.0, 1.7, 0.1)));
    std::vector<Vec6> samples = {Vec6::Zero(), Vec6::Ones()};
    EXPECT_NEAR(normalization_factor(model, Vec6::Unit(1), samples), 1.7, 1e-15);
    Vec6 alpha;
    alpha << 3, 4, 0, 0, 0, 0;
    EXPECT_NEAR(normalization_factor(model, alpha, samples), 1.7 * 5.0, 1e-13);
    EXPECT_THROW(normalization_factor(model, alpha, std::span<const Vec6>{}), InvalidArgument);
}

TEST(NormalizationFactor, GridRefinementStable) {
    std::mt19937_64 rng(40);
    const GpModel model(random_dataset(rng, 20), uniform(make_hp(0.8, 1.0, 0.05)));
    auto grid = [](int n) {
        std::vector<Vec6> out;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                Vec6 x = Vec6::Zero();
                x(0) = -3.0 + 6.0 * i / (n - 1);
                x(1) = -3.0 + 6.0 * j / (n - 1);
                out.push_back(x);
            }
        }
        return out;
    };
    const double coarse = normalization_factor(model, Vec6::Unit(1), grid(25));
    const double fine = normalization_factor(model, Vec6::Unit(1), grid(79));
    EXPECT_NEAR(coarse / fine, 1.0, 0.05);
}

TEST(WeightedStdNorm, Definition) {
    Vec6 w;
    w << 1, 2, 0, 0, 0, 0;
    Vec6 v;
    v << 4, 1, 9, 9, 9, 9;
    EXPECT_DOUBLE_EQ(weighted_std_norm(w, v), std::sqrt(4.0 + 4.0));
}

TEST(Fit, RecoversLengthscaleAndSignal) {
    // Draw from a GP prior in input 0 only and refit.
    const double true_l = 0.7;
    const double true_sf = 1.5;
    const double true_sn = 0.05;
    const int m = 50;
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    Dataset d;
    d.inputs = Eigen::MatrixXd::Zero(m, kGpDims);
    for (int j = 0; j < m; ++j) {
        d.inputs(j, 0) = u(rng);
    }
    Hyperparameters truth = make_hp(1.0, true_sf, true_sn);
    truth.lengthscales(0) = true_l;
    Eigen::MatrixXd K = reference_gram(d.inputs, truth);
    K.diagonal().array() += 1e-10;
    const Eigen::MatrixXd L = K.llt().matrixL();
    std::normal_distribution<double> n(0.0, 1.0);
    d.outputs.resize(m, kGpDims);
    for (int i = 0; i < kGpDims; ++i) {
        Eigen::VectorXd z(m);
        Eigen::VectorXd eps(m);
        for (int j = 0; j < m; ++j) {
            z(j) = n(rng);
            eps(j) = true_sn * n(rng);
        }
        d.outputs.col(i) = L * z + eps;
    }
    const FitResult fit = fit_hyperparameters(d, 7);
    int recovered = 0;
    for (int i = 0; i < kGpDims; ++i) {
        const Hyperparameters& hp = fit.hyperparameters[static_cast<std::size_t>(i)];
        const double rl = hp.lengthscales(0) / true_l;
        const double rs = hp.signal_std / true_sf;
        recovered += (rl < 1.5 && rl > 1.0 / 1.5 && rs < 1.5 && rs > 1.0 / 1.5) ? 1 : 0;
    }
    EXPECT_GE(recovered, 5);
}

TEST(Fit, PureNoiseOutputMatchesTotalVariance) {
    std::mt19937_64 rng(42);
    Dataset d = random_dataset(rng, 40);
    std::normal_distribution<double> n(0.0, 0.05);
    for (Eigen::Index j = 0; j < d.size(); ++j) {
        d.outputs(j, 0) = n(rng);
    }
    const FitResult fit = fit_hyperparameters(d, 3);
    // Signal and noise variance are not separately identifiable for white
    // data once the lengthscales collapse; their sum is.
    const Hyperparameters& hp = fit.hyperparameters[0];
    EXPECT_NEAR(std::hypot(hp.signal_std, hp.noise_std), 0.05, 0.02);
    const GpModel model(d, fit.hyperparameters);
    EXPECT_LT(std::abs(model.mean(Vec6::Zero())(0)), 0.05);
}

TEST(Fit, ImprovesOnEveryRestart) {
    std::mt19937_64 rng(43);
    const FitResult fit = fit_hyperparameters(random_dataset(rng, 20), 5);
    for (const auto& restarts : fit.restarts) {
        ASSERT_EQ(restarts.size(), 8u);
        for (const auto& r : restarts) {
            EXPECT_GE(r.final_log_likelihood, r.initial_log_likelihood);
        }
    }
}

TEST(Fit, DeterministicPerSeed) {
    std::mt19937_64 rng(44);
    const Dataset d = random_dataset(rng, 15);
    const FitResult a = fit_hyperparameters(d, 11);
    const FitResult b = fit_hyperparameters(d, 11);
    for (std::size_t i = 0; i < kGpDims; ++i) {
        EXPECT_EQ(a.hyperparameters[i].lengthscales, b.hyperparameters[i].lengthscales);
        EXPECT_EQ(a.hyperparameters[i].noise_std, b.hyperparameters[i].noise_std);
    }
    EXPECT_EQ(a.log_likelihood, b.log_likelihood);
}

TEST(Fit, NeedsTwoPoints) {
    std::mt19937_64 rng(45);
    EXPECT_THROW(fit_hyperparameters(random_dataset(rng, 1), 1), InvalidArgument);
}
