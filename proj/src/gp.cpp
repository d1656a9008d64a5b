#include "vpursuit/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "vpursuit/errors.hpp"
#include "vpursuit/simd/kernels.hpp"

namespace vpursuit {
namespace {

constexpr double kJitter = 1e-10;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

std::span<const double> as_span(const Vec6& v) { return {v.data(), 6}; }

// Pairwise squared differences per input dimension, dim-major (d * M * M).
class DistancePlanes {
public:
    explicit DistancePlanes(const Eigen::MatrixXd& X)
        : m_(static_cast<std::size_t>(X.rows())), planes_(kGpDims * m_ * m_) {
        for (std::size_t d = 0; d < kGpDims; ++d) {
            double* plane = planes_.data() + d * m_ * m_;
            for (std::size_t j = 0; j < m_; ++j) {
                for (std::size_t k = 0; k < m_; ++k) {
                    const double diff = X(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d)) -
                                        X(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
                    plane[j * m_ + k] = diff * diff;
                }
            }
        }
    }

    // Column-major fill is fine: the matrix is symmetric.
    Eigen::MatrixXd noisy_gram(const Hyperparameters& hp) const {
        const auto m = static_cast<Eigen::Index>(m_);
        Eigen::MatrixXd K(m, m);
        const Vec6 w = hp.inverse_squared_lengthscales();
        std::span<double> out{K.data(), m_ * m_};
        const auto& kern = simd::kernels();
        kern.weighted_sum(planes_, as_span(w), out);
        kern.scaled_exp_neg_half(out, hp.signal_variance(), out);
        K.diagonal().array() += hp.noise_std * hp.noise_std + kJitter * hp.signal_variance();
        return K;
    }

private:
    std::size_t m_;
    std::vector<double> planes_;
};

double log_likelihood_from_gram(const Eigen::MatrixXd& K, const Eigen::VectorXd& y) {
    Eigen::LLT<Eigen::MatrixXd> chol(K);
    if (chol.info() != Eigen::Success) {
        return kNegInf;
    }
    const Eigen::VectorXd a = chol.solve(y);
    const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
    const double ll = -0.5 * y.dot(a) - 0.5 * log_det - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
    return std::isfinite(ll) ? ll : kNegInf;
}

// Parameter vector in log space: [log l_1..6, log sigma_f, log sigma_n].
using LogParams = Eigen::Matrix<double, 8, 1>;

Hyperparameters from_log(const LogParams& p) {
    Hyperparameters hp;
    hp.lengthscales = p.head<6>().array().exp();
    hp.signal_std = std::exp(p(6));
    hp.noise_std = std::exp(p(7));
    return hp;
}

}  // namespace

void Dataset::validate() const {
    if (inputs.cols() != kGpDims || outputs.cols() != kGpDims) {
        throw InvalidArgument("dataset must have 6 input and 6 output columns");
    }
    if (inputs.rows() != outputs.rows()) {
        throw InvalidArgument("dataset input and output row counts differ");
    }
    if (!inputs.allFinite() || !outputs.allFinite()) {
        throw InvalidArgument("dataset contains non-finite values");
    }
}

Dataset Dataset::concatenate(const std::vector<Dataset>& parts) {
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        rows += p.size();
    }
    Dataset out;
    out.inputs.resize(rows, kGpDims);
    out.outputs.resize(rows, kGpDims);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.inputs.middleRows(at, p.size()) = p.inputs;
        out.outputs.middleRows(at, p.size()) = p.outputs;
        at += p.size();
    }
    return out;
}

void Hyperparameters::validate() const {
    if (!(lengthscales.array() > 0.0).all() || !lengthscales.allFinite()) {
        throw InvalidArgument("lengthscales must be positive");
    }
    if (!(signal_std > 0.0) || !(noise_std > 0.0) || !std::isfinite(signal_std) || !std::isfinite(noise_std)) {
        throw InvalidArgument("signal and noise std must be positive");
    }
}

double kernel(const Vec6& x, const Vec6& x2, const Hyperparameters& hp) {
    const Vec6 d = x - x2;
    const double r2 = (d.array().square() * hp.inverse_squared_lengthscales().array()).sum();
    return hp.signal_variance() * std::exp(-0.5 * r2);
}

Eigen::MatrixXd noisy_gram(const Eigen::MatrixXd& inputs, const Hyperparameters& hp) {
    return DistancePlanes(inputs).noisy_gram(hp);
}

double log_marginal_likelihood(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y, const Hyperparameters& hp) {
    return log_likelihood_from_gram(noisy_gram(inputs, hp), y);
}

GpModel::GpModel(Dataset data, const OutputHyperparameters& hyperparameters) : data_(std::move(data)) {
    data_.validate();
    const auto m = static_cast<std::size_t>(data_.size());
    inputs_soa_.resize(kGpDims * m);
    for (std::size_t d = 0; d < kGpDims; ++d) {
        for (std::size_t j = 0; j < m; ++j) {
            inputs_soa_[d * m + j] = data_.inputs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d));
        }
    }
    const DistancePlanes planes(data_.inputs);
    for (int i = 0; i < kGpDims; ++i) {
        auto& out = outputs_[static_cast<std::size_t>(i)];
        out.hp = hyperparameters[static_cast<std::size_t>(i)];
        out.hp.validate();
        out.weights = out.hp.inverse_squared_lengthscales();
        if (m == 0) {
            out.alpha = Eigen::VectorXd(0);
            continue;
        }
        out.chol.compute(planes.noisy_gram(out.hp));
        if (out.chol.info() != Eigen::Success) {
            throw IllConditionedModel("Gram matrix of output " + std::to_string(i + 1) +
                                      " is not positive definite after jitter");
        }
        out.alpha = out.chol.solve(data_.outputs.col(i));
        out.log_det = 2.0 * out.chol.matrixLLT().diagonal().array().log().sum();
    }
}

Posterior GpModel::posterior(const Vec6& x) const {
    Posterior post;
    const auto m = static_cast<std::size_t>(data_.size());
    const auto& kern = simd::kernels();
    Eigen::VectorXd k_star(static_cast<Eigen::Index>(m));
    for (int i = 0; i < kGpDims; ++i) {
        const auto& out = outputs_[static_cast<std::size_t>(i)];
        const double prior = out.hp.signal_variance();
        if (m == 0) {
            post.mean(i) = 0.0;
            post.variance(i) = prior;
            continue;
        }
        kern.se_kernel_row(inputs_soa_, as_span(x), as_span(out.weights), prior, {k_star.data(), m});
        post.mean(i) = kern.dot(as_span(k_star), as_span(out.alpha));
        const Eigen::VectorXd v = out.chol.matrixL().solve(k_star);
        const double var = prior - v.squaredNorm();
        post.variance(i) = std::clamp(var, std::numeric_limits<double>::min(), prior);
    }
    return post;
}

Vec6 GpModel::mean(const Vec6& x) const {
    Vec6 mu = Vec6::Zero();
    const auto m = static_cast<std::size_t>(data_.size());
    if (m == 0) {
        return mu;
    }
    const auto& kern = simd::kernels();
    Eigen::VectorXd k_star(static_cast<Eigen::Index>(m));
    for (int i = 0; i < kGpDims; ++i) {
        const auto& out = outputs_[static_cast<std::size_t>(i)];
        kern.se_kernel_row(inputs_soa_, as_span(x), as_span(out.weights), out.hp.signal_variance(), {k_star.data(), m});
        mu(i) = kern.dot(as_span(k_star), as_span(out.alpha));
    }
    return mu;
}

OutputHyperparameters GpModel::all_hyperparameters() const {
    OutputHyperparameters hps;
    for (std::size_t i = 0; i < kGpDims; ++i) {
        hps[i] = outputs_[i].hp;
    }
    return hps;
}

double GpModel::log_marginal_likelihood(int output) const {
    const auto& out = outputs_[static_cast<std::size_t>(output)];
    const auto m = static_cast<double>(data_.size());
    return -0.5 * data_.outputs.col(output).dot(out.alpha) - 0.5 * out.log_det - 0.5 * m * std::log(2.0 * std::numbers::pi);
}

Vec6 GpModel::rkhs_norm_sq_surrogate() const {
    Vec6 r = Vec6::Zero();
    if (data_.size() == 0) {
        return r;
    }
    for (int i = 0; i < kGpDims; ++i) {
        r(i) = data_.outputs.col(i).dot(outputs_[static_cast<std::size_t>(i)].alpha);
    }
    return r;
}

Vec6 GpModel::information_gain() const {
    Vec6 g = Vec6::Zero();
    const auto m = static_cast<double>(data_.size());
    if (data_.size() == 0) {
        return g;
    }
    for (int i = 0; i < kGpDims; ++i) {
        const auto& out = outputs_[static_cast<std::size_t>(i)];
        // log det(K + s^2 I) - M log s^2 = log det(I + K / s^2)
        g(i) = 0.5 * std::max(0.0, out.log_det - m * std::log(out.hp.noise_std * out.hp.noise_std));
    }
    return g;
}

void GpModel::set_beta(const Vec6& beta, double delta) {
    if (!(beta.array() >= 0.0).all()) {
        throw InvalidArgument("beta entries must be non-negative");
    }
    beta_ = beta;
    beta_delta_ = delta;
}

void GpModel::set_switching_weights(const Vec6& alpha, double sigma_bar) {
    if (!(sigma_bar > 0.0)) {
        throw InvalidArgument("normalization factor must be positive");
    }
    alpha_ = alpha;
    sigma_bar_ = sigma_bar;
}

FitResult fit_hyperparameters(const Dataset& data, std::uint64_t seed, const FitOptions& options) {
    data.validate();
    if (data.size() < 2) {
        throw InvalidArgument("hyperparameter fitting needs at least 2 data points");
    }
    if (options.restarts < 1) {
        throw InvalidArgument("at least one restart is required");
    }
    const DistancePlanes planes(data.inputs);

    // Input dimensions without spread leave the likelihood flat; skip them.
    std::vector<int> active;
    Vec6 spread;
    for (int d = 0; d < kGpDims; ++d) {
        const auto col = data.inputs.col(d);
        const double mean = col.mean();
        spread(d) = std::sqrt((col.array() - mean).square().mean());
        if (spread(d) > 1e-12) {
            active.push_back(d);
        }
    }
    active.push_back(6);
    active.push_back(7);

    LogParams lower;
    LogParams upper;
    lower << Vec6::Constant(std::log(options.min_lengthscale)), std::log(options.min_signal_std), std::log(options.min_noise_std);
    upper << Vec6::Constant(std::log(options.max_lengthscale)), std::log(options.max_signal_std), std::log(options.max_noise_std);

    FitResult result;
    std::ostringstream failures;
    for (int i = 0; i < kGpDims; ++i) {
        const Eigen::VectorXd y = data.outputs.col(i);
        const double y_rms = std::sqrt(y.squaredNorm() / static_cast<double>(y.size()));

        LogParams base;
        for (int d = 0; d < kGpDims; ++d) {
            base(d) = std::log(spread(d) > 1e-12 ? spread(d) : 1.0);
        }
        base(6) = std::log(std::max(y_rms, options.min_signal_std));
        base(7) = std::log(std::max(0.1 * y_rms, options.min_noise_std));
        base = base.cwiseMax(lower).cwiseMin(upper);

        auto evaluate = [&](const LogParams& p) { return log_likelihood_from_gram(planes.noisy_gram(from_log(p)), y); };

        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i) + 1);
        std::normal_distribution<double> perturb(0.0, 1.0);

        LogParams best_params = base;
        double best_ll = kNegInf;
        for (int r = 0; r < options.restarts; ++r) {
            LogParams p = base;
            if (r > 0) {
                for (int idx : active) {
                    p(idx) += perturb(rng);
                }
                p = p.cwiseMax(lower).cwiseMin(upper);
            }
            double ll = evaluate(p);
            const double initial = ll;
            double step = options.initial_step;
            int evals = 1;
            while (step >= options.min_step && evals < options.max_evaluations) {
                bool improved = false;
                for (int idx : active) {
                    for (double dir : {1.0, -1.0}) {
                        LogParams q = p;
                        q(idx) = std::clamp(q(idx) + dir * step, lower(idx), upper(idx));
                        if (q(idx) == p(idx)) {
                            continue;
                        }
                        const double lq = evaluate(q);
                        ++evals;
                        if (lq > ll) {
                            p = q;
                            ll = lq;
                            improved = true;
                            break;
                        }
                    }
                }
                if (!improved) {
                    step *= 0.5;
                }
            }
            result.restarts[static_cast<std::size_t>(i)].push_back({initial, ll});
            if (ll > best_ll) {
                best_ll = ll;
                best_params = p;
            }
        }
        if (!std::isfinite(best_ll)) {
            failures << " output " << (i + 1) << ": no restart reached a finite likelihood;";
            continue;
        }
        result.hyperparameters[static_cast<std::size_t>(i)] = from_log(best_params);
        result.log_likelihood(i) = best_ll;
    }
    if (!failures.str().empty()) {
        throw FitFailure("hyperparameter fit failed:" + failures.str());
    }
    return result;
}

double beta_coefficient(double rkhs_norm_sq, double information_gain, Eigen::Index data_size, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw InvalidArgument("delta must lie in (0, 1)");
    }
    const double l = std::log((static_cast<double>(data_size) + 1.0) / delta);
    return std::sqrt(2.0 * rkhs_norm_sq + 300.0 * information_gain * l * l * l);
}

Vec6 beta(const GpModel& model, double delta, const Vec6& rkhs_norm_estimate) {
    const Vec6 gamma = model.information_gain();
    Vec6 b;
    for (int i = 0; i < kGpDims; ++i) {
        b(i) = beta_coefficient(rkhs_norm_estimate(i) * rkhs_norm_estimate(i), gamma(i), model.size(), delta);
    }
    return b;
}

Vec6 beta(const GpModel& model, double delta) {
    return beta(model, delta, model.rkhs_norm_sq_surrogate().cwiseSqrt());
}

double weighted_std_norm(const Vec6& weights, const Vec6& variance) {
    return std::sqrt((weights.array().square() * variance.array()).sum());
}

double normalization_factor(const GpModel& model, const Vec6& alpha, std::span<const Vec6> domain_samples) {
    if (domain_samples.empty()) {
        throw InvalidArgument("normalization_factor: no domain samples");
    }
    double best = 0.0;
    for (const auto& x : domain_samples) {
        best = std::max(best, weighted_std_norm(alpha, model.posterior(x).variance));
    }
    if (!(best > 0.0)) {
        throw InvalidArgument("normalization_factor: alpha selects no output");
    }
    return best;
}

}  // namespace vpursuit
