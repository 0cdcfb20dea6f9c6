#include "difftomo/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace difftomo {

void GridSpec::validate() const {
    if (nx < 2 || ny < 2) throw std::invalid_argument("grid must be at least 2x2");
    if (!(pitch > 0.0) || !std::isfinite(pitch)) throw std::invalid_argument("grid pitch must be positive and finite");
}

double GridSpec::angular_frequency(std::size_t i, std::size_t n) const noexcept {
    const auto signed_index = i < (n + 1) / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(n);
    return 2.0 * std::numbers::pi * signed_index / (static_cast<double>(n) * pitch);
}

ComplexField2D::ComplexField2D(const GridSpec& grid, cplx fill) : grid_(grid), values_(grid.size(), fill) {}

bool ComplexField2D::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(),
                       [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

RealMap::RealMap(const GridSpec& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

bool RealMap::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (a.nx != b.nx || a.ny != b.ny || a.pitch != b.pitch) {
        throw std::invalid_argument(std::string(what) + ": grid mismatch (" + std::to_string(a.nx) + "x" +
                                    std::to_string(a.ny) + " vs " + std::to_string(b.nx) + "x" +
                                    std::to_string(b.ny) + ")");
    }
}

}  // namespace difftomo
