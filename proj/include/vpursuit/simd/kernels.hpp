#pragma once

// Data-parallel inner loops of the GP code. Every routine has a scalar
// reference and an AVX2+FMA variant; the variant is picked once at runtime
// from CPUID and can be overridden (tests, VPURSUIT_SIMD=scalar).

#include <cstddef>
#include <span>
#include <string_view>

namespace vpursuit::simd {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
    /// out[j] = sum_d weights[d] * planes[d * n + j], n = out.size().
    void (*weighted_sum)(std::span<const double> planes, std::span<const double> weights, std::span<double> out);
    /// out[j] = scale * exp(-0.5 * in[j]); in and out may alias.
    void (*scaled_exp_neg_half)(std::span<const double> in, double scale, std::span<double> out);
    /// SE kernel against one query. inputs is structure-of-arrays (dim-major,
    /// dims * n entries), weights are the inverse squared lengthscales.
    void (*se_kernel_row)(std::span<const double> inputs, std::span<const double> query,
                          std::span<const double> weights, double signal_variance, std::span<double> out);
    double (*dot)(std::span<const double> a, std::span<const double> b);
};

namespace scalar {
const KernelTable& table();
}

namespace avx2 {
/// Valid only when cpu_supports_avx2() is true.
const KernelTable& table();
}

bool cpu_supports_avx2();

Backend active_backend();
/// Forces a backend; Avx2 silently degrades to Scalar on CPUs without it.
void set_backend(Backend backend);
const KernelTable& kernels();

std::string_view backend_name(Backend backend);

}  // namespace vpursuit::simd
