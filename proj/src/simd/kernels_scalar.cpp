#include <cmath>

#include "vpursuit/simd/kernels.hpp"

namespace vpursuit::simd::scalar {
namespace {

void weighted_sum(std::span<const double> planes, std::span<const double> weights, std::span<double> out) {
    const std::size_t n = out.size();
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = 0.0;
    }
    for (std::size_t d = 0; d < weights.size(); ++d) {
        const double w = weights[d];
        const double* plane = planes.data() + d * n;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += w * plane[j];
        }
    }
}

void scaled_exp_neg_half(std::span<const double> in, double scale, std::span<double> out) {
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = scale * std::exp(-0.5 * in[j]);
    }
}

void se_kernel_row(std::span<const double> inputs, std::span<const double> query, std::span<const double> weights,
                   double signal_variance, std::span<double> out) {
    const std::size_t n = out.size();
    for (std::size_t j = 0; j < n; ++j) {
        double r2 = 0.0;
        for (std::size_t d = 0; d < query.size(); ++d) {
            const double diff = inputs[d * n + j] - query[d];
            r2 += weights[d] * diff * diff;
        }
        out[j] = signal_variance * std::exp(-0.5 * r2);
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        s += a[j] * b[j];
    }
    return s;
}

}  // namespace

const KernelTable& table() {
    static const KernelTable t{weighted_sum, scaled_exp_neg_half, se_kernel_row, dot};
    return t;
}

}  // namespace vpursuit::simd::scalar
