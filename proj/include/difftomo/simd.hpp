#pragma once

// Inner loops of the forward/adjoint cascade. Each kernel has a scalar
// reference and, where the build and CPU allow it, an AVX2 variant. The
// variant is picked once at runtime; DIFFTOMO_SIMD=scalar|avx2|auto overrides.
//
// Elementwise kernels are bit-identical across variants (no FMA contraction
// on either side). Reductions (`residual`) differ only in summation order.

#include <cstddef>
#include <string_view>

#include "difftomo/types.hpp"

namespace difftomo::simd {

struct KernelTable {
    const char* name;

    /// out = a * b
    void (*cmul)(const cplx* a, const cplx* b, cplx* out, std::size_t n);
    /// out = a * conj(b)
    void (*cmul_conj)(const cplx* a, const cplx* b, cplx* out, std::size_t n);
    /// out = a * r, r real
    void (*cmul_real)(const cplx* a, const double* r, cplx* out, std::size_t n);
    /// a *= s
    void (*cscale)(cplx* a, double s, std::size_t n);
    /// out = s * |a|^2
    void (*abs2)(const cplx* a, double s, double* out, std::size_t n);
    /// r = |u|^2 - g; returns sum of r^2
    double (*residual)(const cplx* u, const double* g, double* r, std::size_t n);
    /// grad += 2 Im{conj(u) * rp}
    void (*phase_gradient)(const cplx* u, const cplx* rp, double* grad, std::size_t n);
    /// y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels() noexcept;

/// Table used by the library. Resolved on first call.
const KernelTable& active() noexcept;

/// Force a variant ("scalar", "avx2" or "auto"). Returns false if unavailable.
bool select(std::string_view name) noexcept;

}  // namespace difftomo::simd
