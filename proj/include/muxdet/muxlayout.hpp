#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "muxdet/grid.hpp"

namespace muxdet {

struct GridShape {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t count() const { return rows * cols; }
};

struct PixelRect {
  std::size_t row0 = 0, col0 = 0, rows = 0, cols = 0;
  std::size_t row1() const { return row0 + rows; }
  std::size_t col1() const { return col0 + cols; }
  bool intersects(const PixelRect& o) const {
    return row0 < o.row1() && o.row0 < row1() && col0 < o.col1() &&
           o.col0 < col1();
  }
};

struct DetectorPair {
  PixelRect positive;
  PixelRect negative;
};

// Geometry of L video tiles x N frame sub-tiles on the modulator and the
// 2L paired differential detectors on the sensor. Immutable after
// validate(); all queries are pure.
struct MuxLayout {
  std::size_t L = 15;
  std::size_t N = 12;
  std::size_t interp_factor = 2;  // nearest-neighbor upsampling factor f
  GridShape video_grid{3, 5};
  GridShape frame_grid{3, 4};
  std::size_t tile_rows = 48, tile_cols = 48;  // encoder tile resolution
  std::size_t slm_rows = 1056, slm_cols = 1920;
  Real slm_pitch_um = 8.0;
  std::size_t sensor_rows = 1216, sensor_cols = 1936;
  Real sensor_pitch_um = 5.86;
  Real sensor_scale = 0.7;  // demagnification onto the sensor
  Real wavelength_um = 0.52;
  Real propagation_distance_um = 80000.0;
  std::size_t det_rows = 40, det_cols = 40, det_gap = 16;
  std::vector<DetectorPair> detector_regions;  // filled by validate()

  // Modulator footprint of video tile v (the region its frame block covers).
  PixelRect video_tile_rect(std::size_t v) const;
  // Modulator slot of frame i within video tile v (upsampled sub-tile).
  PixelRect frame_slot_rect(std::size_t v, std::size_t i) const;

  void validate();  // derives detector_regions, throws on inconsistency
};

struct PhaseMap {
  RealGrid values;  // every entry in [0, 2*pi)
};

// Writes the L*N encoder sub-tiles (row-major: tiles[v*N + i]) into their
// slots, upsampled by nearest-neighbor replication. Unused pixels stay 0.
PhaseMap assemble_phase(const std::vector<RealGrid>& tiles,
                        const MuxLayout& layout);

// Inverse of assemble_phase for one slot (undoes the replication).
RealGrid extract_tile(const PhaseMap& phase, std::size_t v, std::size_t i,
                      const MuxLayout& layout);

// Mean intensity inside each channel's positive/negative rectangle.
std::vector<std::pair<Real, Real>> readout(const RealGrid& image,
                                           const MuxLayout& layout);

struct DiffractiveStack;  // decoder.hpp

// Entry (u, v): fraction of total output-plane energy landing in channel v's
// detector pair when only tile u is illuminated with a uniform-phase,
// unit-amplitude excitation.
std::vector<std::vector<Real>> crosstalk_matrix(const MuxLayout& layout,
                                                const DiffractiveStack& stack);

}  // namespace muxdet
