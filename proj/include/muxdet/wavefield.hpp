#pragma once

#include "muxdet/grid.hpp"

namespace muxdet {

// Coherent scalar optical field on a uniform grid. Lengths are in
// micrometers throughout.
struct Field {
  Real pitch_um = 8.0;
  Real wavelength_um = 0.52;
  ComplexGrid amplitude;

  std::size_t rows() const { return amplitude.rows(); }
  std::size_t cols() const { return amplitude.cols(); }
  Real energy() const { return total_energy(amplitude); }
};

// Throws std::invalid_argument on empty/non-finite/ill-parameterized fields.
void validate(const Field& f);

// True when the grid undersamples the wavelength (pitch > lambda/2).
// Permitted, but callers may want to surface it as a warning.
bool undersampled(const Field& f);

struct PropagationPlan {
  Real distance_um = 0.0;  // negative = back-propagation
  bool band_limit = true;
  int pad_factor = 2;  // 1 or 2
};

// Angular-spectrum free-space propagation. With band_limit off and
// pad_factor 1 the operator is unitary on the propagating band.
Field propagate(const Field& field, const PropagationPlan& plan);

// Adjoint (conjugate transpose) of propagate under the same plan.
Field propagate_adjoint(const Field& cotangent, const PropagationPlan& plan);

// Per-pixel multiplication by exp(i*phase). Phase grid must match the field.
Field apply_phase(const Field& field, const RealGrid& phase);

// Element-wise |amplitude|^2.
RealGrid intensity(const Field& field);

}  // namespace muxdet
