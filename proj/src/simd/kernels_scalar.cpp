#include "kernels_impl.hpp"

namespace difftomo::simd::scalar {

void cmul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double ar = a[i].real(), ai = a[i].imag();
        const double br = b[i].real(), bi = b[i].imag();
        out[i] = {ar * br - ai * bi, ai * br + ar * bi};
    }
}

void cmul_conj(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double ar = a[i].real(), ai = a[i].imag();
        const double br = b[i].real(), bi = b[i].imag();
        out[i] = {ar * br + ai * bi, ai * br - ar * bi};
    }
}

void cmul_real(const cplx* a, const double* r, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = {a[i].real() * r[i], a[i].imag() * r[i]};
}

void cscale(cplx* a, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = {a[i].real() * s, a[i].imag() * s};
}

void abs2(const cplx* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double re = a[i].real(), im = a[i].imag();
        out[i] = (re * re + im * im) * s;
    }
}

double residual(const cplx* u, const double* g, double* r, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double re = u[i].real(), im = u[i].imag();
        const double d = (re * re + im * im) - g[i];
        r[i] = d;
        sum += d * d;
    }
    return sum;
}

void phase_gradient(const cplx* u, const cplx* rp, double* grad, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double im = u[i].real() * rp[i].imag() - u[i].imag() * rp[i].real();
        grad[i] = grad[i] + im * 2.0;
    }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

}  // namespace difftomo::simd::scalar
