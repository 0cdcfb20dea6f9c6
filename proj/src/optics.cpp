#include "difftomo/optics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "difftomo/fft.hpp"
#include "difftomo/simd.hpp"

namespace difftomo {

PropagationKernel make_kernel(const GridSpec& grid, double distance, double wavenumber, Carrier carrier) {
    grid.validate();
    if (!std::isfinite(distance) || !std::isfinite(wavenumber) || !std::isfinite(carrier.kx) ||
        !std::isfinite(carrier.ky)) {
        throw std::invalid_argument("make_kernel: non-finite input");
    }
    if (!(wavenumber > 0.0)) throw std::invalid_argument("make_kernel: wavenumber must be positive");

    PropagationKernel kernel;
    kernel.grid_ = grid;
    kernel.distance_ = distance;
    kernel.wavenumber_ = wavenumber;
    kernel.carrier_ = carrier;
    kernel.transfer_.assign(grid.size(), cplx{0.0, 0.0});

    // Tilted carriers over the defocus distance give phases of ~1e4 rad, where
    // a double-precision phase is only good to ~1e-12. The phase is therefore
    // formed in long double and reduced mod 2 pi before the sin/cos.
    using ld = long double;
    const ld two_pi = 2.0L * std::numbers::pi_v<long double>;
    const ld k = wavenumber, k2 = k * k, d = distance;
    const auto freq = [&](std::size_t i, std::size_t n) {
        const ld m = i < (n + 1) / 2 ? ld(i) : ld(i) - ld(n);
        return two_pi * m / (ld(n) * ld(grid.pitch));
    };
    for (std::size_t iy = 0; iy < grid.ny; ++iy) {
        const ld ky = freq(iy, grid.ny) + ld(carrier.ky);
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            const ld kx = freq(ix, grid.nx) + ld(carrier.kx);
            const ld kt2 = kx * kx + ky * ky;
            if (kt2 > k2) continue;
            // k - sqrt(k^2 - kt^2), written without the cancellation.
            const ld lag = kt2 / (k + std::sqrt(k2 - kt2));
            const double phase = static_cast<double>(std::remainder(-lag * d, two_pi));
            kernel.transfer_[iy * grid.nx + ix] = {std::cos(phase), std::sin(phase)};
        }
    }
    return kernel;
}

void propagate_in_place(ComplexField2D& u, const PropagationKernel& kernel) {
    require_same_grid(u.grid(), kernel.grid(), "propagate");
    fft::forward(u);
    simd::active().cmul(u.data(), kernel.transfer().data(), u.data(), u.size());
    fft::inverse(u);
}

void adjoint_propagate_in_place(ComplexField2D& u, const PropagationKernel& kernel) {
    require_same_grid(u.grid(), kernel.grid(), "adjoint_propagate");
    fft::forward(u);
    simd::active().cmul_conj(u.data(), kernel.transfer().data(), u.data(), u.size());
    fft::inverse(u);
}

ComplexField2D propagate(ComplexField2D u, const PropagationKernel& kernel) {
    propagate_in_place(u, kernel);
    return u;
}

ComplexField2D adjoint_propagate(ComplexField2D u, const PropagationKernel& kernel) {
    adjoint_propagate_in_place(u, kernel);
    return u;
}

cplx inner_product(const ComplexField2D& a, const ComplexField2D& b) {
    require_same_grid(a.grid(), b.grid(), "inner_product");
    cplx sum{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::conj(a.data()[i]) * b.data()[i];
    return sum;
}

double l2_norm(const ComplexField2D& u) {
    double sum = 0.0;
    for (const auto& v : u.values()) sum += std::norm(v);
    return std::sqrt(sum);
}

}  // namespace difftomo
