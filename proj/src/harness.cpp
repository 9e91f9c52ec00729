#include "muxdet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "muxdet/imageops.hpp"
#include "muxdet/rng.hpp"

namespace muxdet {
namespace {

// ISO/IEC 10918-1 Annex K luminance quantization table.
constexpr int kLumaTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  //
    12, 12, 14, 19, 26,  58,  60,  55,  //
    14, 13, 16, 24, 40,  57,  69,  56,  //
    14, 17, 22, 29, 51,  87,  80,  62,  //
    18, 22, 37, 56, 68,  109, 103, 77,  //
    24, 35, 55, 64, 81,  104, 113, 92,  //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99};

struct CosTable {
  Real c[8][8];  // c[x][u] = C(u) * cos((2x+1) u pi / 16) / 2
  CosTable() {
    for (int x = 0; x < 8; ++x)
      for (int u = 0; u < 8; ++u) {
        const Real cu = (u == 0) ? 1.0 / std::sqrt(2.0) : 1.0;
        c[x][u] = 0.5 * cu *
                  std::cos((2.0 * x + 1.0) * u * std::numbers::pi / 16.0);
      }
  }
};

const CosTable& cos_table() {
  static const CosTable t;
  return t;
}

void dct8x8(const Real in[8][8], Real out[8][8]) {
  const CosTable& t = cos_table();
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      Real s = 0.0;
      for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) s += in[x][y] * t.c[x][u] * t.c[y][v];
      out[u][v] = s;
    }
}

void idct8x8(const Real in[8][8], Real out[8][8]) {
  const CosTable& t = cos_table();
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      Real s = 0.0;
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) s += in[u][v] * t.c[x][u] * t.c[y][v];
      out[x][y] = s;
    }
}

}  // namespace

RealGrid jpeg_roundtrip(const RealGrid& frame, int quality) {
  if (quality < 1 || quality > 100)
    throw std::invalid_argument("jpeg_roundtrip: Q in [1, 100]");
  // IJG quality scaling.
  const int scale = (quality < 50) ? 5000 / quality : 200 - 2 * quality;
  int q[64];
  for (int i = 0; i < 64; ++i)
    q[i] = std::clamp((kLumaTable[i] * scale + 50) / 100, 1, 255);

  const std::size_t R = frame.rows(), C = frame.cols();
  RealGrid out(R, C);
  for (std::size_t br = 0; br < R; br += 8) {
    for (std::size_t bc = 0; bc < C; bc += 8) {
      Real block[8][8], coef[8][8], rec[8][8];
      for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
          // Edge-replicating padding for partial blocks.
          const std::size_t r = std::min(br + static_cast<std::size_t>(x), R - 1);
          const std::size_t c = std::min(bc + static_cast<std::size_t>(y), C - 1);
          block[x][y] = frame(r, c) * 255.0 - 128.0;
        }
      dct8x8(block, coef);
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
          const Real step = static_cast<Real>(q[u * 8 + v]);
          coef[u][v] = std::round(coef[u][v] / step) * step;
        }
      idct8x8(coef, rec);
      for (int x = 0; x < 8 && br + x < R; ++x)
        for (int y = 0; y < 8 && bc + y < C; ++y)
          out(br + x, bc + y) = clamp01((rec[x][y] + 128.0) / 255.0);
    }
  }
  return out;
}

std::vector<RealGrid> perturb(const std::vector<RealGrid>& frames,
                              const Perturbation& p) {
  if (p.magnitude < 0.0)
    throw std::invalid_argument("perturb: magnitude must be >= 0");
  std::vector<RealGrid> out;
  out.reserve(frames.size());
  switch (p.kind) {
    case PerturbKind::gaussian_noise: {
      Rng rng(Rng::mix(p.seed, 0x9015E));
      for (const RealGrid& f : frames) {
        RealGrid g = f;
        if (p.magnitude > 0.0)
          for (Real& v : g) v = clamp01(v + p.magnitude * rng.normal());
        out.push_back(std::move(g));
      }
      break;
    }
    case PerturbKind::gaussian_blur:
      for (const RealGrid& f : frames)
        out.push_back(gaussian_blur(f, p.magnitude));
      break;
    case PerturbKind::jpeg: {
      const int quality = static_cast<int>(std::lround(p.magnitude));
      if (quality < 1 || quality > 100)
        throw std::invalid_argument("perturb: jpeg Q in [1, 100]");
      for (const RealGrid& f : frames)
        out.push_back(jpeg_roundtrip(f, quality));
      break;
    }
  }
  return out;
}

std::vector<SweepRow> degradation_sweep(const HybridModel& model,
                                        const Dataset& testset,
                                        const MuxLayout& layout,
                                        PerturbKind kind,
                                        const std::vector<Real>& magnitudes,
                                        std::uint64_t seed,
                                        std::size_t repeats) {
  std::vector<SweepRow> rows;
  for (Real mag : magnitudes) {
    Perturbation p;
    p.kind = kind;
    p.magnitude = mag;
    p.seed = Rng::mix(seed, static_cast<std::uint64_t>(mag * 1e6));
    auto rng = std::make_shared<Rng>(Rng::mix(p.seed, 0xDE6));
    FrameTransform transform = [p, rng](const RealGrid& frame) {
      if (p.kind == PerturbKind::gaussian_noise) {
        RealGrid g = frame;
        if (p.magnitude > 0.0)
          for (Real& v : g) v = clamp01(v + p.magnitude * rng->normal());
        return g;
      }
      if (p.kind == PerturbKind::gaussian_blur)
        return gaussian_blur(frame, p.magnitude);
      return jpeg_roundtrip(frame, static_cast<int>(std::lround(p.magnitude)));
    };
    const EvalResult res =
        evaluate(model, testset, layout, seed, repeats, {}, transform);
    rows.push_back({mag, channel_report(res.scores, res.labels)});
  }
  return rows;
}

std::vector<MisalignRow> misalignment_sweep(
    const HybridModel& model, const Dataset& testset, const MuxLayout& layout,
    const std::vector<MisalignmentDraw>& grid, std::uint64_t seed,
    std::size_t repeats) {
  std::vector<MisalignRow> rows;
  for (const MisalignmentDraw& d : grid) {
    const Misalignment mis = to_misalignment(d, layout);
    const EvalResult res = evaluate(model, testset, layout, seed, repeats, mis);
    rows.push_back({d, channel_report(res.scores, res.labels)});
  }
  return rows;
}

Dataset attacker_subset(const Dataset& dataset, Real fraction,
                        std::uint64_t seed) {
  std::vector<std::size_t> reals, fakes;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    (dataset[i].fake ? fakes : reals).push_back(i);
  Rng rng(Rng::mix(seed, 0x5B5E7));
  auto pick = [&](std::vector<std::size_t>& pool, std::size_t n) {
    for (std::size_t i = 0; i < std::min(n, pool.size()); ++i)
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    pool.resize(std::min(n, pool.size()));
  };
  const auto per_class = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(
             fraction * 0.5 * static_cast<Real>(dataset.size()))));
  pick(reals, per_class);
  pick(fakes, per_class);
  Dataset out;
  for (std::size_t i : reals) out.push_back(dataset[i]);
  for (std::size_t i : fakes) out.push_back(dataset[i]);
  return out;
}

RealGrid attack_train(const AttackSpec& spec, const FrameNet& surrogate,
                      const Dataset& attacker_subset) {
  if (attacker_subset.empty())
    throw std::invalid_argument("attack_train: empty attacker subset");
  const std::size_t R = surrogate.frame_rows, C = surrogate.frame_cols;
  const Real eps = spec.epsilon;
  const Real alpha = (spec.step_size > 0.0) ? spec.step_size : eps / 4.0;

  Rng rng(Rng::mix(spec.seed, spec.attacker_id));
  RealGrid delta(R, C);
  for (Real& v : delta) v = rng.uniform(-eps, eps);

  std::vector<std::pair<std::size_t, std::size_t>> samples;
  for (std::size_t vi = 0; vi < attacker_subset.size(); ++vi)
    for (std::size_t fi = 0; fi < attacker_subset[vi].frames.size(); ++fi)
      samples.emplace_back(vi, fi);

  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    for (std::size_t i = samples.size(); i-- > 1;)
      std::swap(samples[i], samples[rng.below(i + 1)]);
    RealGrid grad(R, C, 0.0);
    std::size_t in_batch = 0;
    for (const auto& [vi, fi] : samples) {
      RealGrid x = attacker_subset[vi].frames[fi];
      for (std::size_t j = 0; j < x.size(); ++j)
        x.data()[j] += delta.data()[j];
      FrameNetCache cache;
      const Real logit = framenet_forward(surrogate, x, &cache);
      if (!std::isfinite(logit))
        throw std::runtime_error("attack_train: non-finite forward");
      const Real y = attacker_subset[vi].fake ? 1.0 : 0.0;
      // Ascend the BCE: cotangent of the loss itself.
      const Real d_logit = 1.0 / (1.0 + std::exp(-logit)) - y;
      RealGrid d_input;
      framenet_backward(surrogate, cache, d_logit, nullptr, &d_input);
      for (std::size_t j = 0; j < grad.size(); ++j)
        grad.data()[j] += d_input.data()[j];
      if (++in_batch == spec.batch_frames) {
        for (std::size_t j = 0; j < delta.size(); ++j) {
          const Real g = grad.data()[j];
          const Real step = (g > 0.0) ? alpha : (g < 0.0 ? -alpha : 0.0);
          delta.data()[j] = std::clamp(delta.data()[j] + step, -eps, eps);
        }
        grad = RealGrid(R, C, 0.0);
        in_batch = 0;
      }
    }
    if (in_batch > 0) {
      for (std::size_t j = 0; j < delta.size(); ++j) {
        const Real g = grad.data()[j];
        const Real step = (g > 0.0) ? alpha : (g < 0.0 ? -alpha : 0.0);
        delta.data()[j] = std::clamp(delta.data()[j] + step, -eps, eps);
      }
    }
  }
  return delta;
}

Real victim_accuracy(const Victim& victim, const Dataset& testset,
                     const MuxLayout& layout, std::uint64_t seed,
                     const FrameTransform& transform) {
  if (victim.is_hybrid) {
    const EvalResult res =
        evaluate(victim.hybrid, testset, layout, seed, 1, {}, transform);
    std::size_t correct = 0, total = 0;
    for (std::size_t v = 0; v < res.scores.size(); ++v)
      for (std::size_t i = 0; i < res.scores[v].size(); ++i) {
        const bool pred = res.scores[v][i] > 0.0;
        correct += (pred == res.labels[v][i]) ? 1 : 0;
        ++total;
      }
    return total ? static_cast<Real>(correct) / static_cast<Real>(total) : 0.0;
  }
  std::size_t correct = 0;
  for (std::size_t vi = 0; vi < testset.size(); ++vi) {
    const Video& v = testset[vi];
    const std::vector<std::size_t> idx =
        sample_indices(v.frames.size(), layout.N, Rng::mix(seed, vi));
    std::vector<RealGrid> frames;
    for (std::size_t fi : idx) {
      RealGrid f = v.frames[fi];
      if (transform) f = transform(f);
      frames.push_back(std::move(f));
    }
    const bool pred = framenet_video_score(victim.digital, frames) > 0.0;
    correct += (pred == v.fake) ? 1 : 0;
  }
  return testset.empty()
             ? 0.0
             : static_cast<Real>(correct) / static_cast<Real>(testset.size());
}

std::vector<AttackCell> attack_eval(
    const std::vector<Victim>& victims,
    const std::vector<std::pair<Real, std::vector<RealGrid>>>& deltas_by_eps,
    const Dataset& testset, const MuxLayout& layout, std::uint64_t seed) {
  std::vector<AttackCell> cells;
  for (const auto& [eps, deltas] : deltas_by_eps) {
    for (const Victim& victim : victims) {
      Real acc_sum = 0.0;
      for (const RealGrid& delta : deltas) {
        FrameTransform stamp = [&delta](const RealGrid& frame) {
          RealGrid out = frame;
          for (std::size_t i = 0; i < out.size(); ++i)
            out.data()[i] = clamp01(out.data()[i] + delta.data()[i]);
          return out;
        };
        acc_sum += victim_accuracy(victim, testset, layout, seed, stamp);
      }
      cells.push_back(
          {eps, victim.name,
           deltas.empty() ? victim_accuracy(victim, testset, layout, seed)
                          : acc_sum / static_cast<Real>(deltas.size())});
    }
  }
  return cells;
}

void EnergyModel::validate() const {
  if (!(encoder_flops_per_frame > 0) || !(joules_per_flop > 0) ||
      !(decoder_power_low_w > 0) || !(decoder_power_high_w > 0) ||
      !(frame_rate_low_hz > 0) || !(frame_rate_high_hz > 0) || L == 0)
    throw std::invalid_argument("EnergyModel: all fields must be positive");
  if (decoder_power_low_w > decoder_power_high_w ||
      frame_rate_low_hz > frame_rate_high_hz)
    throw std::invalid_argument("EnergyModel: low must be <= high");
}

EnergyReport energy_report(const EnergyModel& model, const MuxLayout& layout,
                           const DiffractiveStack& stack,
                           Real flops_per_frame_measured) {
  model.validate();
  const Real flops = (flops_per_frame_measured > 0.0)
                         ? flops_per_frame_measured
                         : model.encoder_flops_per_frame;
  EnergyReport r;
  r.encoder_mj_per_video = flops * static_cast<Real>(layout.N) *
                           model.joules_per_flop * 1e3;
  r.decoder_batch_mj_low =
      model.decoder_power_low_w / model.frame_rate_high_hz * 1e3;
  r.decoder_batch_mj_high =
      model.decoder_power_high_w / model.frame_rate_low_hz * 1e3;
  r.decoder_video_mj_low =
      r.decoder_batch_mj_low / static_cast<Real>(model.L);
  r.decoder_video_mj_high =
      r.decoder_batch_mj_high / static_cast<Real>(model.L);
  r.twin_decoder_mj_per_batch =
      static_cast<Real>(flops_decode(layout, stack)) * model.joules_per_flop *
      1e3;
  return r;
}

}  // namespace muxdet
