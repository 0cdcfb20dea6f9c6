#pragma once

#include <cstddef>

#include "difftomo/types.hpp"

namespace difftomo {

/// Isotropic total variation sum |grad x| with forward differences and
/// Neumann boundaries (no difference across the last row/column).
double total_variation(const RealMap& x);

/// argmin_x 1/2 ||x - b||^2 + weight * TV(x), solved with `iterations` steps of
/// the accelerated dual gradient projection (FGP) of Beck and Teboulle.
/// weight == 0 returns b unchanged.
RealMap tv_denoise(const RealMap& b, double weight, std::size_t iterations);

}  // namespace difftomo
