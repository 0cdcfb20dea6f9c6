#pragma once

#include "difftomo/types.hpp"

namespace difftomo::fft {

// Unitary 2D DFT: forward and inverse are each scaled by 1/sqrt(nx*ny), so
// inverse(forward(u)) == u and Parseval holds without extra factors. The zero
// frequency sits at index 0. Backed by FFTW with estimate-mode plans, which
// are deterministic; plans are cached per (nx, ny, direction) and creation is
// serialized. Execution is safe from any thread.

void forward(ComplexField2D& u);
void inverse(ComplexField2D& u);

}  // namespace difftomo::fft
