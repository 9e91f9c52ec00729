#include "muxdet/muxlayout.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace muxdet {
namespace {

constexpr Real kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

PixelRect MuxLayout::video_tile_rect(std::size_t v) const {
  const std::size_t th = slm_rows / video_grid.rows;
  const std::size_t tw = slm_cols / video_grid.cols;
  const std::size_t vr = v / video_grid.cols, vc = v % video_grid.cols;
  const std::size_t bh = interp_factor * tile_rows * frame_grid.rows;
  const std::size_t bw = interp_factor * tile_cols * frame_grid.cols;
  // Frame block centered within the nominal tile cell.
  PixelRect r;
  r.row0 = vr * th + (th - bh) / 2;
  r.col0 = vc * tw + (tw - bw) / 2;
  r.rows = bh;
  r.cols = bw;
  return r;
}

PixelRect MuxLayout::frame_slot_rect(std::size_t v, std::size_t i) const {
  const PixelRect tile = video_tile_rect(v);
  const std::size_t fr = i / frame_grid.cols, fc = i % frame_grid.cols;
  PixelRect r;
  r.rows = interp_factor * tile_rows;
  r.cols = interp_factor * tile_cols;
  r.row0 = tile.row0 + fr * r.rows;
  r.col0 = tile.col0 + fc * r.cols;
  return r;
}

void MuxLayout::validate() {
  if (L == 0 || N == 0) throw std::invalid_argument("MuxLayout: L, N >= 1");
  if (interp_factor == 0)
    throw std::invalid_argument("MuxLayout: interp_factor >= 1");
  if (L > video_grid.count())
    throw std::invalid_argument("MuxLayout: L exceeds video grid capacity");
  if (N > frame_grid.count())
    throw std::invalid_argument("MuxLayout: N exceeds frame grid capacity");
  if (!(slm_pitch_um > 0) || !(sensor_pitch_um > 0) || !(sensor_scale > 0) ||
      !(wavelength_um > 0))
    throw std::invalid_argument("MuxLayout: lengths/scales must be > 0");

  const std::size_t th = slm_rows / video_grid.rows;
  const std::size_t tw = slm_cols / video_grid.cols;
  if (interp_factor * tile_rows * frame_grid.rows > th ||
      interp_factor * tile_cols * frame_grid.cols > tw)
    throw std::invalid_argument(
        "MuxLayout: upsampled frame block does not fit in a video tile");

  // Detector pairs: centered under each tile footprint scaled onto the
  // sensor, positive left of negative with a guard gap.
  detector_regions.clear();
  const Real slm_rc = 0.5 * static_cast<Real>(slm_rows);
  const Real slm_cc = 0.5 * static_cast<Real>(slm_cols);
  const Real sen_rc = 0.5 * static_cast<Real>(sensor_rows);
  const Real sen_cc = 0.5 * static_cast<Real>(sensor_cols);
  const Real to_sensor = slm_pitch_um * sensor_scale / sensor_pitch_um;
  for (std::size_t v = 0; v < L; ++v) {
    const PixelRect tile = video_tile_rect(v);
    const Real cy = (static_cast<Real>(tile.row0) +
                     0.5 * static_cast<Real>(tile.rows) - slm_rc) *
                        to_sensor +
                    sen_rc;
    const Real cx = (static_cast<Real>(tile.col0) +
                     0.5 * static_cast<Real>(tile.cols) - slm_cc) *
                        to_sensor +
                    sen_cc;
    const Real pair_w = static_cast<Real>(2 * det_cols + det_gap);
    const auto lrow = static_cast<long>(
        std::lround(cy - 0.5 * static_cast<Real>(det_rows)));
    const auto lcol = static_cast<long>(std::lround(cx - 0.5 * pair_w));
    if (lrow < 0 || lcol < 0)
      throw std::invalid_argument("MuxLayout: detector outside sensor");
    DetectorPair p;
    p.positive = {static_cast<std::size_t>(lrow),
                  static_cast<std::size_t>(lcol), det_rows, det_cols};
    p.negative = {static_cast<std::size_t>(lrow),
                  static_cast<std::size_t>(lcol) + det_cols + det_gap,
                  det_rows, det_cols};
    for (const PixelRect* r : {&p.positive, &p.negative})
      if (r->row1() > sensor_rows || r->col1() > sensor_cols)
        throw std::invalid_argument("MuxLayout: detector outside sensor");
    detector_regions.push_back(p);
  }
  // Pairwise disjointness across all 2L rectangles.
  std::vector<const PixelRect*> rects;
  for (const DetectorPair& p : detector_regions) {
    rects.push_back(&p.positive);
    rects.push_back(&p.negative);
  }
  for (std::size_t a = 0; a < rects.size(); ++a)
    for (std::size_t b = a + 1; b < rects.size(); ++b)
      if (rects[a]->intersects(*rects[b]))
        throw std::invalid_argument("MuxLayout: detector rectangles overlap");
}

PhaseMap assemble_phase(const std::vector<RealGrid>& tiles,
                        const MuxLayout& layout) {
  if (tiles.size() != layout.L * layout.N)
    throw std::invalid_argument("assemble_phase: expected L*N tiles");
  PhaseMap out;
  out.values = RealGrid(layout.slm_rows, layout.slm_cols, 0.0);
  const std::size_t f = layout.interp_factor;
  for (std::size_t v = 0; v < layout.L; ++v) {
    for (std::size_t i = 0; i < layout.N; ++i) {
      const RealGrid& t = tiles[v * layout.N + i];
      if (t.rows() != layout.tile_rows || t.cols() != layout.tile_cols)
        throw std::invalid_argument("assemble_phase: tile shape mismatch");
      const PixelRect slot = layout.frame_slot_rect(v, i);
      for (std::size_t r = 0; r < slot.rows; ++r)
        for (std::size_t c = 0; c < slot.cols; ++c) {
          Real val = t(r / f, c / f);
          val = std::fmod(val, kTwoPi);
          if (val < 0) val += kTwoPi;
          out.values(slot.row0 + r, slot.col0 + c) = val;
        }
    }
  }
  return out;
}

RealGrid extract_tile(const PhaseMap& phase, std::size_t v, std::size_t i,
                      const MuxLayout& layout) {
  if (v >= layout.L || i >= layout.N)
    throw std::out_of_range("extract_tile: index out of range");
  if (phase.values.rows() != layout.slm_rows ||
      phase.values.cols() != layout.slm_cols)
    throw std::invalid_argument("extract_tile: phase map shape mismatch");
  const PixelRect slot = layout.frame_slot_rect(v, i);
  const std::size_t f = layout.interp_factor;
  RealGrid out(layout.tile_rows, layout.tile_cols);
  for (std::size_t r = 0; r < layout.tile_rows; ++r)
    for (std::size_t c = 0; c < layout.tile_cols; ++c)
      out(r, c) = phase.values(slot.row0 + r * f, slot.col0 + c * f);
  return out;
}

std::vector<std::pair<Real, Real>> readout(const RealGrid& image,
                                           const MuxLayout& layout) {
  if (image.rows() != layout.sensor_rows || image.cols() != layout.sensor_cols)
    throw std::invalid_argument("readout: image shape mismatch");
  std::vector<std::pair<Real, Real>> out;
  out.reserve(layout.L);
  auto mean_in = [&image](const PixelRect& r) {
    Real s = 0.0;
    for (std::size_t i = r.row0; i < r.row1(); ++i)
      for (std::size_t j = r.col0; j < r.col1(); ++j) s += image(i, j);
    return s / static_cast<Real>(r.rows * r.cols);
  };
  for (const DetectorPair& p : layout.detector_regions)
    out.emplace_back(mean_in(p.positive), mean_in(p.negative));
  return out;
}

}  // namespace muxdet
