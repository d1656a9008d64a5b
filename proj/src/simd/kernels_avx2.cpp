// Compiled with -mavx2 -mfma; only reached through the dispatcher after a
// CPUID check.

#include <immintrin.h>

#include <cmath>

#include "vpursuit/simd/kernels.hpp"

namespace vpursuit::simd::avx2 {
namespace {

constexpr std::size_t kLanes = 4;

// exp(x) for x <= 0 (the only range the SE kernel produces). Cody-Waite
// reduction by ln 2 and the Cephes rational approximation on [-ln2/2, ln2/2];
// within 2 ulp of std::exp. Arguments below -708 flush to zero.
inline __m256d exp_nonpositive(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d lower = _mm256_set1_pd(-708.0);

    const __m256d underflow = _mm256_cmp_pd(x, lower, _CMP_LT_OQ);
    x = _mm256_max_pd(x, lower);

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);

    const __m256d rr = _mm256_mul_pd(r, r);
    __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
    p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(3.02994407707441961300e-2));
    p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910e-1));
    p = _mm256_mul_pd(p, r);
    __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
    q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.52448340349684104192e-3));
    q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766e-1));
    q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000009e0));
    __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
    e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

    // 2^n through the exponent field: n + 1023 lands in the low mantissa
    // bits after adding 1.5 * 2^52, then shifts into place.
    const __m256d biased = _mm256_add_pd(n, _mm256_set1_pd(6755399441055744.0 + 1023.0));
    const __m256i bits = _mm256_slli_epi64(_mm256_castpd_si256(biased), 52);
    e = _mm256_mul_pd(e, _mm256_castsi256_pd(bits));
    return _mm256_andnot_pd(underflow, e);
}

void weighted_sum(std::span<const double> planes, std::span<const double> weights, std::span<double> out) {
    const std::size_t n = out.size();
    const std::size_t dims = weights.size();
    std::size_t j = 0;
    for (; j + kLanes <= n; j += kLanes) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t d = 0; d < dims; ++d) {
            acc = _mm256_fmadd_pd(_mm256_set1_pd(weights[d]), _mm256_loadu_pd(planes.data() + d * n + j), acc);
        }
        _mm256_storeu_pd(out.data() + j, acc);
    }
    for (; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dims; ++d) {
            acc = std::fma(weights[d], planes[d * n + j], acc);
        }
        out[j] = acc;
    }
}

void scaled_exp_neg_half(std::span<const double> in, double scale, std::span<double> out) {
    const std::size_t n = out.size();
    const __m256d mhalf = _mm256_set1_pd(-0.5);
    const __m256d s = _mm256_set1_pd(scale);
    std::size_t j = 0;
    for (; j + kLanes <= n; j += kLanes) {
        const __m256d x = _mm256_mul_pd(mhalf, _mm256_loadu_pd(in.data() + j));
        _mm256_storeu_pd(out.data() + j, _mm256_mul_pd(s, exp_nonpositive(x)));
    }
    for (; j < n; ++j) {
        out[j] = scale * std::exp(-0.5 * in[j]);
    }
}

void se_kernel_row(std::span<const double> inputs, std::span<const double> query, std::span<const double> weights,
                   double signal_variance, std::span<double> out) {
    const std::size_t n = out.size();
    const std::size_t dims = query.size();
    const __m256d mhalf = _mm256_set1_pd(-0.5);
    const __m256d s = _mm256_set1_pd(signal_variance);
    std::size_t j = 0;
    for (; j + kLanes <= n; j += kLanes) {
        __m256d r2 = _mm256_setzero_pd();
        for (std::size_t d = 0; d < dims; ++d) {
            const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(inputs.data() + d * n + j), _mm256_set1_pd(query[d]));
            r2 = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_set1_pd(weights[d]), diff), diff, r2);
        }
        _mm256_storeu_pd(out.data() + j, _mm256_mul_pd(s, exp_nonpositive(_mm256_mul_pd(mhalf, r2))));
    }
    for (; j < n; ++j) {
        double r2 = 0.0;
        for (std::size_t d = 0; d < dims; ++d) {
            const double diff = inputs[d * n + j] - query[d];
            r2 = std::fma(weights[d] * diff, diff, r2);
        }
        out[j] = signal_variance * std::exp(-0.5 * r2);
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 2 * kLanes <= n; j += 2 * kLanes) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + j), _mm256_loadu_pd(b.data() + j), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + j + kLanes), _mm256_loadu_pd(b.data() + j + kLanes), acc1);
    }
    for (; j + kLanes <= n; j += kLanes) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + j), _mm256_loadu_pd(b.data() + j), acc0);
    }
    const __m256d acc = _mm256_add_pd(acc0, acc1);
    const __m128d half = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
    double s = _mm_cvtsd_f64(_mm_add_sd(half, _mm_unpackhi_pd(half, half)));
    for (; j < n; ++j) {
        s = std::fma(a[j], b[j], s);
    }
    return s;
}

}  // namespace

const KernelTable& table() {
    static const KernelTable t{weighted_sum, scaled_exp_neg_half, se_kernel_row, dot};
    return t;
}

}  // namespace vpursuit::simd::avx2
