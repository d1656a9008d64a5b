#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vpursuit/geometry.hpp"

namespace vpursuit {

inline constexpr int kGpDims = 6;

/// Training pairs: rows of `inputs` are vector-form poses, rows of `outputs`
/// the measured body velocities.
struct Dataset {
    Eigen::MatrixXd inputs = Eigen::MatrixXd(0, kGpDims);
    Eigen::MatrixXd outputs = Eigen::MatrixXd(0, kGpDims);

    Eigen::Index size() const { return inputs.rows(); }
    void validate() const;
    static Dataset concatenate(const std::vector<Dataset>& parts);
};

/// SE-kernel hyperparameters of one output dimension. Lambda is diagonal with
/// entries 1 / lengthscale^2.
struct Hyperparameters {
    Vec6 lengthscales = Vec6::Ones();
    double signal_std = 1.0;
    double noise_std = 0.1;

    double signal_variance() const { return signal_std * signal_std; }
    Vec6 inverse_squared_lengthscales() const { return lengthscales.array().square().inverse(); }
    void validate() const;
};

using OutputHyperparameters = std::array<Hyperparameters, kGpDims>;

/// sigma_f^2 exp(-1/2 (x - x')^T Lambda (x - x')).
double kernel(const Vec6& x, const Vec6& x2, const Hyperparameters& hp);

struct Posterior {
    Vec6 mean;
    Vec6 variance;  // diagonal of Sigma

    Vec6 std_dev() const { return variance.cwiseSqrt(); }
};

/// Independent GP per output dimension over a shared dataset. Immutable after
/// construction apart from the switching/bound metadata.
class GpModel {
public:
    GpModel(Dataset data, const OutputHyperparameters& hyperparameters);

    Posterior posterior(const Vec6& x) const;
    Vec6 mean(const Vec6& x) const;

    const Dataset& dataset() const { return data_; }
    const Hyperparameters& hyperparameters(int output) const { return outputs_[static_cast<std::size_t>(output)].hp; }
    OutputHyperparameters all_hyperparameters() const;
    Eigen::Index size() const { return data_.size(); }

    /// Log marginal likelihood of output i at the stored hyperparameters.
    double log_marginal_likelihood(int output) const;
    /// [Y]_i^T (K + sigma^2 I)^{-1} [Y]_i, an upper bound on the squared
    /// RKHS norm of the posterior-mean interpolant.
    Vec6 rkhs_norm_sq_surrogate() const;
    /// 1/2 log det(I + sigma_n^-2 K) per output.
    Vec6 information_gain() const;

    // Metadata used by switching estimation and the bound evaluators.
    const Vec6& beta() const { return beta_; }
    double beta_delta() const { return beta_delta_; }
    const Vec6& alpha() const { return alpha_; }
    double sigma_bar() const { return sigma_bar_; }
    void set_beta(const Vec6& beta, double delta);
    void set_switching_weights(const Vec6& alpha, double sigma_bar);

private:
    struct OutputFit {
        Hyperparameters hp;
        Eigen::LLT<Eigen::MatrixXd> chol;
        Eigen::VectorXd alpha;  // (K + sigma^2 I)^{-1} y
        Eigen::VectorXd weights;
        double log_det = 0.0;  // log det(K + sigma^2 I)
    };

    Dataset data_;
    std::vector<double> inputs_soa_;
    std::array<OutputFit, kGpDims> outputs_;
    Vec6 beta_ = Vec6::Zero();
    double beta_delta_ = 0.0;
    Vec6 alpha_ = Vec6::Unit(1);
    double sigma_bar_ = 1.0;
};

/// Gram matrix K + (sigma_n^2 + jitter) I of one output, via the SIMD kernels.
Eigen::MatrixXd noisy_gram(const Eigen::MatrixXd& inputs, const Hyperparameters& hp);

/// Log marginal likelihood of y under hp; -inf when the Gram matrix is not PD.
double log_marginal_likelihood(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y, const Hyperparameters& hp);

struct FitOptions {
    int restarts = 8;
    int max_evaluations = 600;  // per restart
    double initial_step = 1.0;  // log space
    double min_step = 1e-3;
    double min_lengthscale = 1e-2;
    double max_lengthscale = 1e3;
    double min_signal_std = 1e-4;
    double max_signal_std = 1e3;
    double min_noise_std = 1e-6;
    double max_noise_std = 1e2;
};

struct RestartTrace {
    double initial_log_likelihood;
    double final_log_likelihood;
};

struct FitResult {
    OutputHyperparameters hyperparameters;
    Vec6 log_likelihood;
    std::array<std::vector<RestartTrace>, kGpDims> restarts;
};

/// Evidence maximisation per output: multi-start compass search in log space.
/// Deterministic for a given seed. Throws FitFailure when no restart reaches
/// a finite likelihood.
FitResult fit_hyperparameters(const Dataset& data, std::uint64_t seed, const FitOptions& options = {});

/// sqrt(2 ||V||_k^2 + 300 gamma log^3((M + 1) / delta)).
double beta_coefficient(double rkhs_norm_sq, double information_gain, Eigen::Index data_size, double delta);

/// Per-output beta with the given RKHS norm estimates (not squared).
Vec6 beta(const GpModel& model, double delta, const Vec6& rkhs_norm_estimate);
/// beta with the model's own RKHS surrogate.
Vec6 beta(const GpModel& model, double delta);

/// max over samples of ||alpha^T Sigma^{1/2}(x)||.
double normalization_factor(const GpModel& model, const Vec6& alpha, std::span<const Vec6> domain_samples);

/// ||w^T Sigma^{1/2}|| for diagonal Sigma given as variances.
double weighted_std_norm(const Vec6& weights, const Vec6& variance);

}  // namespace vpursuit
