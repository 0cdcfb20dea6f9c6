#include <atomic>
#include <cstdlib>
#include <string_view>

#include "difftomo/simd.hpp"
#include "kernels_impl.hpp"

namespace difftomo::simd {
namespace {

constexpr KernelTable kScalar{
    "scalar",         scalar::cmul,     scalar::cmul_conj,      scalar::cmul_real, scalar::cscale,
    scalar::abs2,     scalar::residual, scalar::phase_gradient, scalar::axpy,
};

#if defined(DIFFTOMO_BUILD_AVX2)
constexpr KernelTable kAvx2{
    "avx2",         avx2::cmul,     avx2::cmul_conj,      avx2::cmul_real, avx2::cscale,
    avx2::abs2,     avx2::residual, avx2::phase_gradient, avx2::axpy,
};
#endif

bool cpu_has_avx2() noexcept {
#if defined(DIFFTOMO_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* resolve(std::string_view name) noexcept {
    if (name == "scalar") return &kScalar;
    if (name == "avx2") return avx2_kernels();
    if (name == "auto" || name.empty()) {
        if (const auto* t = avx2_kernels()) return t;
        return &kScalar;
    }
    return nullptr;
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

const KernelTable* avx2_kernels() noexcept {
#if defined(DIFFTOMO_BUILD_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() noexcept {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t) return *t;
    const char* env = std::getenv("DIFFTOMO_SIMD");
    t = resolve(env ? std::string_view(env) : std::string_view("auto"));
    if (!t) t = resolve("auto");
    const KernelTable* expected = nullptr;
    g_active.compare_exchange_strong(expected, t, std::memory_order_acq_rel);
    return *g_active.load(std::memory_order_acquire);
}

bool select(std::string_view name) noexcept {
    const KernelTable* t = resolve(name);
    if (!t) return false;
    g_active.store(t, std::memory_order_release);
    return true;
}

}  // namespace difftomo::simd
