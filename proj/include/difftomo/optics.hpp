#pragma once

#include <span>

#include "difftomo/types.hpp"

namespace difftomo {

/// Transverse wavevector (rad/m) of a tilted illumination. Fields propagated
/// with a non-zero carrier are envelopes: the physical field is
/// envelope(x, y) * exp(j (kx x + ky y)).
struct Carrier {
    double kx = 0.0;
    double ky = 0.0;
    bool operator==(const Carrier&) const = default;
};

/// Angular-spectrum transfer function exp(-j (k - sqrt(k^2 - kx^2 - ky^2)) d)
/// sampled on the DFT frequencies of a grid, zero on the evanescent band.
/// With a carrier the function is evaluated at (kx + carrier.kx, ky + carrier.ky),
/// which propagates the envelope of a tilted wave exactly.
class PropagationKernel {
public:
    const GridSpec& grid() const noexcept { return grid_; }
    double distance() const noexcept { return distance_; }
    double wavenumber() const noexcept { return wavenumber_; }
    const Carrier& carrier() const noexcept { return carrier_; }
    std::span<const cplx> transfer() const noexcept { return transfer_; }

    /// Transfer value at DFT bin (ix, iy).
    cplx at(std::size_t ix, std::size_t iy) const noexcept { return transfer_[iy * grid_.nx + ix]; }

private:
    friend PropagationKernel make_kernel(const GridSpec&, double, double, Carrier);

    GridSpec grid_{};
    double distance_ = 0.0;
    double wavenumber_ = 0.0;
    Carrier carrier_{};
    AlignedVector<cplx> transfer_;
};

/// Negative distance propagates backward. Throws std::invalid_argument for a
/// non-positive wavenumber or non-finite inputs.
PropagationKernel make_kernel(const GridSpec& grid, double distance, double wavenumber, Carrier carrier = {});

/// inverse_dft(dft(u) * H). No padding: the field is treated as periodic.
ComplexField2D propagate(ComplexField2D u, const PropagationKernel& kernel);

/// Hermitian adjoint of propagate: inverse_dft(dft(u) * conj(H)).
ComplexField2D adjoint_propagate(ComplexField2D u, const PropagationKernel& kernel);

void propagate_in_place(ComplexField2D& u, const PropagationKernel& kernel);
void adjoint_propagate_in_place(ComplexField2D& u, const PropagationKernel& kernel);

/// Inner product <a, b> = sum conj(a) b.
cplx inner_product(const ComplexField2D& a, const ComplexField2D& b);
double l2_norm(const ComplexField2D& u);

}  // namespace difftomo
