// Compiled with -mavx2 only. The dispatcher never calls into this file unless
// the CPU reports AVX2.
#include <immintrin.h>

#include "kernels_impl.hpp"

namespace difftomo::simd::avx2 {
namespace {

inline __m256d load2(const cplx* p) { return _mm256_loadu_pd(reinterpret_cast<const double*>(p)); }
inline void store2(cplx* p, __m256d v) { _mm256_storeu_pd(reinterpret_cast<double*>(p), v); }

// [r0 r1] -> [r0 r0 r1 r1]
inline __m256d spread2(const double* r) {
    return _mm256_permute4x64_pd(_mm256_castpd128_pd256(_mm_loadu_pd(r)), _MM_SHUFFLE(1, 1, 0, 0));
}

// [re0 im0 re1 im1], [re2 im2 re3 im3] -> [|z0|^2 |z1|^2 |z2|^2 |z3|^2]
inline __m256d abs2_4(__m256d a, __m256d b) {
    const __m256d h = _mm256_hadd_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(b, b));
    return _mm256_permute4x64_pd(h, _MM_SHUFFLE(3, 1, 2, 0));
}

}  // namespace

void cmul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d va = load2(a + i);
        const __m256d vb = load2(b + i);
        const __m256d bre = _mm256_movedup_pd(vb);
        const __m256d bim = _mm256_permute_pd(vb, 0xF);
        const __m256d aswap = _mm256_permute_pd(va, 0x5);
        store2(out + i, _mm256_addsub_pd(_mm256_mul_pd(va, bre), _mm256_mul_pd(aswap, bim)));
    }
    scalar::cmul(a + i, b + i, out + i, n - i);
}

void cmul_conj(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d va = load2(a + i);
        const __m256d vb = load2(b + i);
        const __m256d bre = _mm256_movedup_pd(vb);
        const __m256d bim = _mm256_permute_pd(vb, 0xF);
        const __m256d aswap = _mm256_permute_pd(va, 0x5);
        const __m256d t2 = _mm256_xor_pd(_mm256_mul_pd(aswap, bim), sign);
        store2(out + i, _mm256_addsub_pd(_mm256_mul_pd(va, bre), t2));
    }
    scalar::cmul_conj(a + i, b + i, out + i, n - i);
}

void cmul_real(const cplx* a, const double* r, cplx* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) store2(out + i, _mm256_mul_pd(load2(a + i), spread2(r + i)));
    scalar::cmul_real(a + i, r + i, out + i, n - i);
}

void cscale(cplx* a, double s, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) store2(a + i, _mm256_mul_pd(load2(a + i), vs));
    scalar::cscale(a + i, s, n - i);
}

void abs2(const cplx* a, double s, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(abs2_4(load2(a + i), load2(a + i + 2)), vs));
    scalar::abs2(a + i, s, out + i, n - i);
}

double residual(const cplx* u, const double* g, double* r, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(abs2_4(load2(u + i), load2(u + i + 2)), _mm256_loadu_pd(g + i));
        _mm256_storeu_pd(r + i, d);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    const double head = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    return head + scalar::residual(u + i, g + i, r + i, n - i);
}

void phase_gradient(const cplx* u, const cplx* rp, double* grad, std::size_t n) {
    const __m256d two = _mm256_set1_pd(2.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // [ur*ri, ui*rr] per element; horizontal difference gives Im{conj(u) rp}.
        const __m256d ta = _mm256_mul_pd(load2(u + i), _mm256_permute_pd(load2(rp + i), 0x5));
        const __m256d tb = _mm256_mul_pd(load2(u + i + 2), _mm256_permute_pd(load2(rp + i + 2), 0x5));
        const __m256d im = _mm256_permute4x64_pd(_mm256_hsub_pd(ta, tb), _MM_SHUFFLE(3, 1, 2, 0));
        _mm256_storeu_pd(grad + i, _mm256_add_pd(_mm256_loadu_pd(grad + i), _mm256_mul_pd(im, two)));
    }
    scalar::phase_gradient(u + i, rp + i, grad + i, n - i);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
    scalar::axpy(a, x + i, y + i, n - i);
}

}  // namespace difftomo::simd::avx2
