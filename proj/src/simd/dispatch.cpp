#include <atomic>
#include <cstdlib>
#include <string>

#include "vpursuit/simd/kernels.hpp"

namespace vpursuit::simd {
namespace {

Backend detect() {
    if (const char* env = std::getenv("VPURSUIT_SIMD"); env != nullptr && std::string(env) == "scalar") {
        return Backend::Scalar;
    }
    return cpu_supports_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
    static std::atomic<Backend> backend{detect()};
    return backend;
}

}  // namespace

bool cpu_supports_avx2() {
#if defined(VPURSUIT_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok;
#else
    return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
    if (backend == Backend::Avx2 && !cpu_supports_avx2()) {
        backend = Backend::Scalar;
    }
    current().store(backend, std::memory_order_relaxed);
}

const KernelTable& kernels() {
#if defined(VPURSUIT_HAVE_AVX2)
    if (active_backend() == Backend::Avx2) {
        return avx2::table();
    }
#endif
    return scalar::table();
}

std::string_view backend_name(Backend backend) {
    switch (backend) {
        case Backend::Avx2:
            return "avx2";
        case Backend::Scalar:
            break;
    }
    return "scalar";
}

}  // namespace vpursuit::simd
