#pragma once

#include "muxdet/grid.hpp"

namespace muxdet {

// Separable Gaussian blur, kernel radius ceil(3*sigma), edge-replicating
// boundary. sigma <= 0 returns the input unchanged.
RealGrid gaussian_blur(const RealGrid& img, Real sigma);

inline Real clamp01(Real v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

Real mean(const RealGrid& g);

// Zero-mean, unit-variance (population std); constant grids map to all-zero.
RealGrid standardize(const RealGrid& frame);

}  // namespace muxdet
