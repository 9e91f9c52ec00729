#include "muxdet/decoder.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "muxdet/imageops.hpp"
#include "muxdet/rng.hpp"

namespace muxdet {
namespace {

constexpr Real kTwoPi = 2.0 * std::numbers::pi;

PropagationPlan decode_plan(Real distance_um) {
  PropagationPlan p;
  p.distance_um = distance_um;
  p.band_limit = true;
  p.pad_factor = 2;
  return p;
}

struct AxisWeights {
  // For sensor index s: first overlapped prop pixel and overlap lengths
  // (prop-pixel units). footprint is the total footprint length.
  std::vector<long> first;
  std::vector<std::vector<Real>> w;
  Real footprint = 0.0;
};

AxisWeights axis_weights(std::size_t sensor_n, std::size_t prop_n,
                         Real sensor_pitch, Real prop_pitch, Real scale) {
  AxisWeights aw;
  aw.footprint = sensor_pitch / (scale * prop_pitch);
  aw.first.resize(sensor_n);
  aw.w.resize(sensor_n);
  const Real half_s = 0.5 * static_cast<Real>(sensor_n);
  const Real half_p = 0.5 * static_cast<Real>(prop_n);
  for (std::size_t s = 0; s < sensor_n; ++s) {
    const Real a = (static_cast<Real>(s) - half_s) * aw.footprint + half_p;
    const Real b = a + aw.footprint;
    const long p0 = static_cast<long>(std::floor(a));
    const long p1 = static_cast<long>(std::ceil(b));
    aw.first[s] = p0;
    for (long p = p0; p < p1; ++p) {
      const Real lo = std::max(a, static_cast<Real>(p));
      const Real hi = std::min(b, static_cast<Real>(p + 1));
      aw.w[s].push_back(std::max(0.0, hi - lo));
    }
  }
  return aw;
}

Real weight_at(const AxisWeights& aw, std::size_t s, long p) {
  const long i = p - aw.first[s];
  if (i < 0 || i >= static_cast<long>(aw.w[s].size())) return 0.0;
  return aw.w[s][static_cast<std::size_t>(i)];
}

// Per-channel mean with the readout window shifted by (dr, dc) pixels;
// out-of-window pixels contribute 0 but the divisor stays the rect area.
Real mean_in_shifted(const RealGrid& image, const PixelRect& rect, long dr,
                     long dc) {
  Real s = 0.0;
  const long R = static_cast<long>(image.rows());
  const long C = static_cast<long>(image.cols());
  for (std::size_t i = 0; i < rect.rows; ++i)
    for (std::size_t j = 0; j < rect.cols; ++j) {
      const long r = static_cast<long>(rect.row0 + i) + dr;
      const long c = static_cast<long>(rect.col0 + j) + dc;
      if (r < 0 || r >= R || c < 0 || c >= C) continue;
      s += image(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
  return s / static_cast<Real>(rect.rows * rect.cols);
}

}  // namespace

void DiffractiveStack::validate(const MuxLayout& layout) const {
  if (distances_um.size() != layers.size() + 1)
    throw std::invalid_argument("DiffractiveStack: need K+1 distances");
  for (Real d : distances_um)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw std::invalid_argument("DiffractiveStack: distances must be >= 0");
  for (const RealGrid& l : layers)
    if (l.rows() != layout.slm_rows || l.cols() != layout.slm_cols)
      throw std::invalid_argument(
          "DiffractiveStack: layer grid must match modulator grid");
}

DiffractiveStack make_stack(std::size_t K, const MuxLayout& layout,
                            const std::vector<Real>& distances_um,
                            std::uint64_t seed, Real init_scale) {
  if (distances_um.size() != K + 1)
    throw std::invalid_argument("make_stack: need K+1 distances");
  DiffractiveStack s;
  s.distances_um = distances_um;
  s.layer_pitch_um = layout.slm_pitch_um;
  Rng rng(Rng::mix(seed, 0xD1FF));
  for (std::size_t k = 0; k < K; ++k) {
    RealGrid layer(layout.slm_rows, layout.slm_cols, 0.0);
    if (init_scale > 0.0)
      for (Real& v : layer) v = rng.uniform(-init_scale, init_scale);
    s.layers.push_back(std::move(layer));
  }
  return s;
}

RealGrid decode(const PhaseMap& phase, const DiffractiveStack& stack,
                const MuxLayout& layout, const Misalignment& mis,
                DecodeCache* cache) {
  if (phase.values.rows() != layout.slm_rows ||
      phase.values.cols() != layout.slm_cols)
    throw std::invalid_argument("decode: phase map shape mismatch");
  stack.validate(layout);

  Field field;
  field.pitch_um = layout.slm_pitch_um;
  field.wavelength_um = layout.wavelength_um;
  field.amplitude = ComplexGrid(layout.slm_rows, layout.slm_cols,
                                Complex(1.0, 0.0));
  Field u0 = apply_phase(field, phase.values);
  if (cache) cache->modulator_field = u0;

  Real d0 = stack.distances_um[0];
  if (stack.K() == 0) d0 += mis.axial_um;  // the single hop is the final hop
  Field cur = propagate(u0, decode_plan(d0));
  for (std::size_t k = 0; k < stack.K(); ++k) {
    cur = apply_phase(cur, stack.layers[k]);
    if (cache) cache->post_layer.push_back(cur);
    Real d = stack.distances_um[k + 1];
    if (k + 1 == stack.K()) d += mis.axial_um;
    cur = propagate(cur, decode_plan(d));
  }
  if (cache) {
    cache->sensor_field = cur;
    cache->misalignment = mis;
  }
  return resample_to_sensor(intensity(cur), layout);
}

DecodeGrads decode_backward(const RealGrid& d_sensor,
                            const DiffractiveStack& stack,
                            const MuxLayout& layout, const DecodeCache& cache) {
  const RealGrid d_prop = resample_to_sensor_adjoint(d_sensor, layout);

  // Cotangent convention: g = dL/dRe + i*dL/dIm. Intensity pullback 2*g*u.
  Field g = cache.sensor_field;
  for (std::size_t i = 0; i < g.amplitude.size(); ++i)
    g.amplitude.data()[i] =
        2.0 * d_prop.data()[i] * cache.sensor_field.amplitude.data()[i];

  DecodeGrads out;
  out.d_theta.resize(stack.K());
  for (std::size_t k = stack.K(); k-- > 0;) {
    Real d = stack.distances_um[k + 1];
    if (k + 1 == stack.K()) d += cache.misalignment.axial_um;
    g = propagate_adjoint(g, decode_plan(d));
    const Field& y = cache.post_layer[k];
    out.d_theta[k] = RealGrid(layout.slm_rows, layout.slm_cols);
    for (std::size_t i = 0; i < y.amplitude.size(); ++i) {
      const Complex gy = g.amplitude.data()[i];
      const Complex yy = y.amplitude.data()[i];
      // dL/dtheta = Re(conj(g_y) * i * y)
      out.d_theta[k].data()[i] =
          (std::conj(gy) * Complex(0.0, 1.0) * yy).real();
      // g_x = exp(-i*theta) * g_y
      const Real th = stack.layers[k](i / layout.slm_cols, i % layout.slm_cols);
      g.amplitude.data()[i] = Complex(std::cos(th), -std::sin(th)) * gy;
    }
  }
  Real d0 = stack.distances_um[0];
  if (stack.K() == 0) d0 += cache.misalignment.axial_um;
  g = propagate_adjoint(g, decode_plan(d0));

  out.d_phi = RealGrid(layout.slm_rows, layout.slm_cols);
  for (std::size_t i = 0; i < g.amplitude.size(); ++i) {
    const Complex gy = g.amplitude.data()[i];
    const Complex u = cache.modulator_field.amplitude.data()[i];
    out.d_phi.data()[i] = (std::conj(gy) * Complex(0.0, 1.0) * u).real();
  }
  return out;
}

std::vector<ChannelScore> score_channels(const RealGrid& image,
                                         const MuxLayout& layout,
                                         const Misalignment& mis) {
  if (image.rows() != layout.sensor_rows || image.cols() != layout.sensor_cols)
    throw std::invalid_argument("score_channels: image shape mismatch");
  std::vector<ChannelScore> out;
  out.reserve(layout.L);
  for (std::size_t v = 0; v < layout.L; ++v) {
    const DetectorPair& p = layout.detector_regions[v];
    ChannelScore s;
    s.v = v;
    s.i_plus = mean_in_shifted(image, p.positive, mis.shift_rows,
                               mis.shift_cols);
    s.i_minus = mean_in_shifted(image, p.negative, mis.shift_rows,
                                mis.shift_cols);
    const Real denom = s.i_plus + s.i_minus;
    s.score = (denom > 0.0) ? (s.i_plus - s.i_minus) / denom : 0.0;
    s.fake = s.score > 0.0;
    out.push_back(s);
  }
  return out;
}

RealGrid illumination_correct(const RealGrid& raw,
                              const RealGrid& flat_reference, Real blur_sigma) {
  if (!raw.same_shape(flat_reference))
    throw std::invalid_argument("illumination_correct: shape mismatch");
  RealGrid ref = gaussian_blur(flat_reference, blur_sigma);
  const Real m = mean(ref);
  constexpr Real kFloor = 1e-12;
  RealGrid out(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Real denom = std::max(ref.data()[i] / std::max(m, kFloor), kFloor);
    out.data()[i] = raw.data()[i] / denom;
  }
  return out;
}

std::uint64_t flops_decode(const MuxLayout& layout,
                           const DiffractiveStack& stack, int pad_factor) {
  const std::uint64_t R = layout.slm_rows, C = layout.slm_cols;
  const std::uint64_t Rp = R * static_cast<std::uint64_t>(pad_factor);
  const std::uint64_t Cp = C * static_cast<std::uint64_t>(pad_factor);
  const auto lg = static_cast<std::uint64_t>(
      std::llround(std::log2(static_cast<double>(Rp * Cp))));
  const std::uint64_t per_hop = 2 * 5 * Rp * Cp * lg + 6 * Rp * Cp;
  const std::uint64_t hops = stack.K() + 1;
  return hops * per_hop + stack.K() * 6 * R * C + 3 * R * C;
}

RealGrid resample_to_sensor(const RealGrid& prop_intensity,
                            const MuxLayout& layout) {
  const AxisWeights ar =
      axis_weights(layout.sensor_rows, prop_intensity.rows(),
                   layout.sensor_pitch_um, layout.slm_pitch_um,
                   layout.sensor_scale);
  const AxisWeights ac =
      axis_weights(layout.sensor_cols, prop_intensity.cols(),
                   layout.sensor_pitch_um, layout.slm_pitch_um,
                   layout.sensor_scale);
  const Real inv_area = 1.0 / (ar.footprint * ac.footprint);
  const long PR = static_cast<long>(prop_intensity.rows());
  const long PC = static_cast<long>(prop_intensity.cols());
  RealGrid out(layout.sensor_rows, layout.sensor_cols, 0.0);
  for (std::size_t sr = 0; sr < layout.sensor_rows; ++sr) {
    for (std::size_t sc = 0; sc < layout.sensor_cols; ++sc) {
      Real acc = 0.0;
      for (std::size_t i = 0; i < ar.w[sr].size(); ++i) {
        const long pr = ar.first[sr] + static_cast<long>(i);
        if (pr < 0 || pr >= PR) continue;
        for (std::size_t j = 0; j < ac.w[sc].size(); ++j) {
          const long pc = ac.first[sc] + static_cast<long>(j);
          if (pc < 0 || pc >= PC) continue;
          acc += ar.w[sr][i] * ac.w[sc][j] *
                 prop_intensity(static_cast<std::size_t>(pr),
                                static_cast<std::size_t>(pc));
        }
      }
      out(sr, sc) = acc * inv_area;  // mean intensity over the footprint
    }
  }
  return out;
}

RealGrid resample_to_sensor_adjoint(const RealGrid& d_sensor,
                                    const MuxLayout& layout) {
  const std::size_t PR = layout.slm_rows, PC = layout.slm_cols;
  const AxisWeights ar =
      axis_weights(layout.sensor_rows, PR, layout.sensor_pitch_um,
                   layout.slm_pitch_um, layout.sensor_scale);
  const AxisWeights ac =
      axis_weights(layout.sensor_cols, PC, layout.sensor_pitch_um,
                   layout.slm_pitch_um, layout.sensor_scale);
  const Real inv_area = 1.0 / (ar.footprint * ac.footprint);
  RealGrid out(PR, PC, 0.0);
  for (std::size_t sr = 0; sr < layout.sensor_rows; ++sr) {
    for (std::size_t sc = 0; sc < layout.sensor_cols; ++sc) {
      const Real g = d_sensor(sr, sc) * inv_area;
      if (g == 0.0) continue;
      for (std::size_t i = 0; i < ar.w[sr].size(); ++i) {
        const long pr = ar.first[sr] + static_cast<long>(i);
        if (pr < 0 || pr >= static_cast<long>(PR)) continue;
        for (std::size_t j = 0; j < ac.w[sc].size(); ++j) {
          const long pc = ac.first[sc] + static_cast<long>(j);
          if (pc < 0 || pc >= static_cast<long>(PC)) continue;
          out(static_cast<std::size_t>(pr), static_cast<std::size_t>(pc)) +=
              g * ar.w[sr][i] * ac.w[sc][j];
        }
      }
    }
  }
  return out;
}

Real sensor_energy(const RealGrid& image, const MuxLayout& layout) {
  const Real fl = layout.sensor_pitch_um /
                  (layout.sensor_scale * layout.slm_pitch_um);
  return sum(image) * fl * fl;
}

// Cross-talk lives here rather than muxlayout.cpp so the geometry module
// does not link against the decoder.
std::vector<std::vector<Real>> crosstalk_matrix(const MuxLayout& layout,
                                                const DiffractiveStack& stack) {
  std::vector<std::vector<Real>> M(layout.L, std::vector<Real>(layout.L, 0.0));
  const Real fl = layout.sensor_pitch_um /
                  (layout.sensor_scale * layout.slm_pitch_um);
  const Real px_area = fl * fl;
  for (std::size_t u = 0; u < layout.L; ++u) {
    Field field;
    field.pitch_um = layout.slm_pitch_um;
    field.wavelength_um = layout.wavelength_um;
    field.amplitude = ComplexGrid(layout.slm_rows, layout.slm_cols);
    const PixelRect tile = layout.video_tile_rect(u);
    for (std::size_t r = tile.row0; r < tile.row1(); ++r)
      for (std::size_t c = tile.col0; c < tile.col1(); ++c)
        field.amplitude(r, c) = Complex(1.0, 0.0);

    Field cur = propagate(field, decode_plan(stack.distances_um[0]));
    for (std::size_t k = 0; k < stack.K(); ++k) {
      cur = apply_phase(cur, stack.layers[k]);
      cur = propagate(cur, decode_plan(stack.distances_um[k + 1]));
    }
    const RealGrid prop_i = intensity(cur);
    const Real total = sum(prop_i);
    if (total <= 0.0) continue;
    const RealGrid img = resample_to_sensor(prop_i, layout);
    for (std::size_t v = 0; v < layout.L; ++v) {
      const DetectorPair& p = layout.detector_regions[v];
      Real e = 0.0;
      for (const PixelRect* rect : {&p.positive, &p.negative})
        for (std::size_t r = rect->row0; r < rect->row1(); ++r)
          for (std::size_t c = rect->col0; c < rect->col1(); ++c)
            e += img(r, c) * px_area;
      M[u][v] = e / total;
    }
  }
  return M;
}

}  // namespace muxdet
