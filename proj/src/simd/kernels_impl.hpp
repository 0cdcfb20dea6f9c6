#pragma once

#include <cstddef>

#include "difftomo/types.hpp"

namespace difftomo::simd {

#define DIFFTOMO_DECLARE_KERNELS                                                       \
    void cmul(const cplx* a, const cplx* b, cplx* out, std::size_t n);                  \
    void cmul_conj(const cplx* a, const cplx* b, cplx* out, std::size_t n);             \
    void cmul_real(const cplx* a, const double* r, cplx* out, std::size_t n);           \
    void cscale(cplx* a, double s, std::size_t n);                                      \
    void abs2(const cplx* a, double s, double* out, std::size_t n);                     \
    double residual(const cplx* u, const double* g, double* r, std::size_t n);         \
    void phase_gradient(const cplx* u, const cplx* rp, double* grad, std::size_t n);   \
    void axpy(double a, const double* x, double* y, std::size_t n);

namespace scalar {
DIFFTOMO_DECLARE_KERNELS
}

namespace avx2 {
DIFFTOMO_DECLARE_KERNELS
}

#undef DIFFTOMO_DECLARE_KERNELS

}  // namespace difftomo::simd
