#pragma once

#include "muxdet/grid.hpp"

namespace muxdet {

// In-place 2D DFT. Forward is unnormalized; inverse carries the 1/(rows*cols)
// factor so ifft2(fft2(x)) == x. Plans are cached per shape; concurrent calls
// on distinct grids are safe.
void fft2(ComplexGrid& g);
void ifft2(ComplexGrid& g);

// Swaps quadrants so the zero-frequency bin moves to the grid center
// (and back, for even dimensions).
void fftshift(ComplexGrid& g);
void fftshift(RealGrid& g);

}  // namespace muxdet
