#pragma once

#include <cstdint>
#include <vector>

#include "muxdet/grid.hpp"
#include "muxdet/muxlayout.hpp"
#include "muxdet/wavefield.hpp"

namespace muxdet {

// K trainable phase-only layers with K+1 propagation distances d0..dK.
// K = 0 is pure free space over d0.
struct DiffractiveStack {
  std::vector<RealGrid> layers;     // size K
  std::vector<Real> distances_um;   // size K+1, all > 0
  Real layer_pitch_um = 8.0;

  std::size_t K() const { return layers.size(); }
  void validate(const MuxLayout& layout) const;
};

DiffractiveStack make_stack(std::size_t K, const MuxLayout& layout,
                            const std::vector<Real>& distances_um,
                            std::uint64_t seed, Real init_scale = 0.0);

struct ChannelScore {
  std::size_t v = 0;
  Real i_plus = 0.0, i_minus = 0.0;
  Real score = 0.0;  // (i+ - i-)/(i+ + i-), 0 when the sum is 0
  bool fake = false;  // score > 0; ties -> real
};

// Sensor-plane misalignment applied at readout (lateral, pixels) and as an
// extra final propagation distance (axial, um).
struct Misalignment {
  long shift_rows = 0;
  long shift_cols = 0;
  Real axial_um = 0.0;
};

struct DecodeCache {
  Field modulator_field;          // exp(i*Phi)
  std::vector<Field> post_layer;  // field after each exp(i*theta_k)
  Field sensor_field;             // field at the sensor plane
  Misalignment misalignment;
};

// Unit-amplitude coherent illumination of the phase map, propagation through
// the stack, intensity, and area-weighted resampling onto the sensor grid.
RealGrid decode(const PhaseMap& phase, const DiffractiveStack& stack,
                const MuxLayout& layout, const Misalignment& mis = {},
                DecodeCache* cache = nullptr);

struct DecodeGrads {
  RealGrid d_phi;
  std::vector<RealGrid> d_theta;
};

DecodeGrads decode_backward(const RealGrid& d_sensor,
                            const DiffractiveStack& stack,
                            const MuxLayout& layout, const DecodeCache& cache);

std::vector<ChannelScore> score_channels(const RealGrid& image,
                                         const MuxLayout& layout,
                                         const Misalignment& mis = {});

// Divides out the blurred, mean-normalized flat-field reference.
RealGrid illumination_correct(const RealGrid& raw,
                              const RealGrid& flat_reference, Real blur_sigma);

// FLOP tally of one decode pass. Convention: a 2D transform of size RxC
// costs 5*R*C*log2(R*C) real FLOPs, a complex multiply 6, |.|^2 3 per pixel.
std::uint64_t flops_decode(const MuxLayout& layout,
                           const DiffractiveStack& stack, int pad_factor = 2);

// Area-weighted box integration from the propagation grid to sensor pixels.
RealGrid resample_to_sensor(const RealGrid& prop_intensity,
                            const MuxLayout& layout);
RealGrid resample_to_sensor_adjoint(const RealGrid& d_sensor,
                                    const MuxLayout& layout);

// Total energy of a sensor image measured back in propagation-plane units
// (for passivity checks against modulator-plane energy).
Real sensor_energy(const RealGrid& image, const MuxLayout& layout);

}  // namespace muxdet
