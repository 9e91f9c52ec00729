#include "muxdet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "muxdet/imageops.hpp"
#include "muxdet/rng.hpp"

namespace muxdet {
namespace {

Real softplus(Real x) {
  return (x > 30.0) ? x : std::log1p(std::exp(x));
}

Real sigmoid(Real x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ParamSlot {
  Real* p = nullptr;
  std::size_t n = 0;
};

class Adam {
 public:
  Adam(Real lr, Real weight_decay)
      : base_lr_(lr), weight_decay_(weight_decay) {}

  void step(const std::vector<ParamSlot>& params,
            const std::vector<ParamSlot>& grads, Real lr_scale) {
    if (m_.empty()) {
      for (const ParamSlot& s : params) {
        m_.emplace_back(s.n, 0.0);
        v_.emplace_back(s.n, 0.0);
      }
    }
    ++t_;
    const Real lr = base_lr_ * lr_scale;
    const Real bc1 = 1.0 - std::pow(kBeta1, static_cast<Real>(t_));
    const Real bc2 = 1.0 - std::pow(kBeta2, static_cast<Real>(t_));
    for (std::size_t s = 0; s < params.size(); ++s) {
      Real* p = params[s].p;
      const Real* g = grads[s].p;
      for (std::size_t i = 0; i < params[s].n; ++i) {
        m_[s][i] = kBeta1 * m_[s][i] + (1.0 - kBeta1) * g[i];
        v_[s][i] = kBeta2 * v_[s][i] + (1.0 - kBeta2) * g[i] * g[i];
        const Real mhat = m_[s][i] / bc1;
        const Real vhat = v_[s][i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + kEps) +
                      weight_decay_ * p[i]);
      }
    }
  }

 private:
  static constexpr Real kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Real base_lr_, weight_decay_;
  std::size_t t_ = 0;
  std::vector<std::vector<Real>> m_, v_;
};

std::vector<ParamSlot> encoder_slots(EncoderParams& p) {
  std::vector<ParamSlot> out;
  for (std::vector<Real>* t : param_tensors(p))
    out.push_back({t->data(), t->size()});
  return out;
}

std::vector<ParamSlot> encoder_grad_slots(EncoderGrads& g) {
  std::vector<ParamSlot> out;
  for (std::vector<Real>* t : grad_tensors(g))
    out.push_back({t->data(), t->size()});
  return out;
}

// d_loss/d_sensor image from per-channel score cotangents, honoring the
// shifted readout window used in the forward pass.
RealGrid sensor_cotangent(const std::vector<Real>& d_scores,
                          const std::vector<ChannelScore>& scores,
                          const MuxLayout& layout, const Misalignment& mis) {
  RealGrid d_img(layout.sensor_rows, layout.sensor_cols, 0.0);
  for (std::size_t v = 0; v < layout.L; ++v) {
    const Real p = scores[v].i_plus, m = scores[v].i_minus;
    const Real denom = p + m;
    if (denom <= 0.0) continue;
    const Real ds = d_scores[v];
    const Real dp = ds * 2.0 * m / (denom * denom);
    const Real dm = -ds * 2.0 * p / (denom * denom);
    const DetectorPair& pair = layout.detector_regions[v];
    auto spread = [&](const PixelRect& rect, Real g) {
      const Real per_px = g / static_cast<Real>(rect.rows * rect.cols);
      for (std::size_t i = 0; i < rect.rows; ++i)
        for (std::size_t j = 0; j < rect.cols; ++j) {
          const long r = static_cast<long>(rect.row0 + i) + mis.shift_rows;
          const long c = static_cast<long>(rect.col0 + j) + mis.shift_cols;
          if (r < 0 || r >= static_cast<long>(layout.sensor_rows) || c < 0 ||
              c >= static_cast<long>(layout.sensor_cols))
            continue;
          d_img(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) +=
              per_px;
        }
    };
    spread(pair.positive, dp);
    spread(pair.negative, dm);
  }
  return d_img;
}

// Pulls the phase-map cotangent back onto the L*N encoder tiles
// (adjoint of the nearest-neighbor upsampling assembly).
std::vector<RealGrid> disassemble_cotangent(const RealGrid& d_phi,
                                            const MuxLayout& layout) {
  std::vector<RealGrid> tiles(layout.L * layout.N,
                              RealGrid(layout.tile_rows, layout.tile_cols));
  const std::size_t f = layout.interp_factor;
  for (std::size_t v = 0; v < layout.L; ++v)
    for (std::size_t i = 0; i < layout.N; ++i) {
      const PixelRect slot = layout.frame_slot_rect(v, i);
      RealGrid& t = tiles[v * layout.N + i];
      for (std::size_t r = 0; r < slot.rows; ++r)
        for (std::size_t c = 0; c < slot.cols; ++c)
          t(r / f, c / f) += d_phi(slot.row0 + r, slot.col0 + c);
    }
  return tiles;
}

struct BatchGrads {
  EncoderGrads enc;
  std::vector<RealGrid> theta;
};

// One forward/backward pass over a batch. Returns the loss.
Real batch_step(const std::vector<VideoSample>& batch,
                const std::vector<bool>& labels, const MuxLayout& layout,
                HybridModel& model, const TrainConfig& config,
                const Misalignment& mis, BatchGrads* grads) {
  std::vector<EncodeCache> enc_caches;
  const PhaseMap phi =
      forward_batch(batch, model.encoder, layout,
                    (grads && !config.freeze_encoder) ? &enc_caches : nullptr);
  DecodeCache dec_cache;
  const RealGrid img =
      decode(phi, model.stack, layout, mis, grads ? &dec_cache : nullptr);
  const std::vector<ChannelScore> scores = score_channels(img, layout, mis);
  std::vector<Real> raw(layout.L);
  for (std::size_t v = 0; v < layout.L; ++v) raw[v] = scores[v].score;

  std::vector<Real> d_scores;
  const Real loss = bce_loss(raw, labels, config.temperature,
                             grads ? &d_scores : nullptr);
  if (!std::isfinite(loss))
    throw std::runtime_error("train: non-finite loss");
  if (!grads) return loss;

  const RealGrid d_img = sensor_cotangent(d_scores, scores, layout, mis);
  DecodeGrads dg = decode_backward(d_img, model.stack, layout, dec_cache);
  grads->theta = std::move(dg.d_theta);
  if (!config.freeze_encoder) {
    const std::vector<RealGrid> d_tiles =
        disassemble_cotangent(dg.d_phi, layout);
    grads->enc = make_grads(model.encoder);
    for (std::size_t t = 0; t < d_tiles.size(); ++t)
      encode_frame_backward(d_tiles[t], model.encoder, enc_caches[t],
                            grads->enc);
  }
  return loss;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(temperature > 0.0))
    throw std::invalid_argument("TrainConfig: temperature must be > 0");
  if (learning_rate < 0.0 || weight_decay < 0.0)
    throw std::invalid_argument(
        "TrainConfig: learning_rate and weight_decay must be >= 0");
  if (freeze_encoder && freeze_stack)
    throw std::invalid_argument(
        "TrainConfig: freezing both parameter groups leaves nothing to train");
  if (lateral_max_um < 0.0 || axial_max_um < 0.0)
    throw std::invalid_argument("TrainConfig: misalignment ranges >= 0");
  if (!(fine_tune_fraction > 0.0) || fine_tune_fraction > 1.0)
    throw std::invalid_argument("TrainConfig: fine_tune_fraction in (0, 1]");
}

Real bce_loss(const std::vector<Real>& scores, const std::vector<bool>& labels,
              Real tau, std::vector<Real>* d_scores) {
  if (!(tau > 0.0)) throw std::invalid_argument("bce_loss: tau must be > 0");
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("bce_loss: bad inputs");
  const Real inv_n = 1.0 / static_cast<Real>(scores.size());
  if (d_scores) d_scores->assign(scores.size(), 0.0);
  Real loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Real t = scores[i] / tau;
    const Real y = labels[i] ? 1.0 : 0.0;
    loss += (y * softplus(-t) + (1.0 - y) * softplus(t)) * inv_n;
    if (d_scores) (*d_scores)[i] = (sigmoid(t) - y) / tau * inv_n;
  }
  return loss;
}

MisalignmentDraw vaccinate_sample(const TrainConfig& config, Rng& rng) {
  MisalignmentDraw d;
  d.dx_um = rng.uniform(-config.lateral_max_um, config.lateral_max_um);
  d.dy_um = rng.uniform(-config.lateral_max_um, config.lateral_max_um);
  d.dz_um = rng.uniform(0.0, config.axial_max_um);
  return d;
}

Misalignment to_misalignment(const MisalignmentDraw& d,
                             const MuxLayout& layout) {
  Misalignment m;
  m.shift_cols = std::lround(d.dx_um / layout.sensor_pitch_um);
  m.shift_rows = std::lround(d.dy_um / layout.sensor_pitch_um);
  m.axial_um = d.dz_um;
  return m;
}

TrainHistory train(const Dataset& dataset, const MuxLayout& layout,
                   HybridModel& model, const TrainConfig& config,
                   std::size_t step_budget) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  const std::size_t batches_per_epoch =
      (dataset.size() + layout.L - 1) / layout.L;
  const std::size_t total_steps =
      step_budget ? step_budget : config.epochs * batches_per_epoch;

  Adam opt(config.learning_rate, config.weight_decay);
  Rng shuffle_rng(Rng::mix(config.seed, 0x5FFF1E));
  Rng vac_rng(Rng::mix(config.seed, 0xACC1));

  TrainHistory hist;
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  for (std::size_t epoch = 0; step < total_steps; ++epoch) {
    // Fisher-Yates shuffle so each video visits varying channel slots.
    for (std::size_t i = order.size(); i-- > 1;)
      std::swap(order[i], order[shuffle_rng.below(i + 1)]);

    Real epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t b = 0; b < batches_per_epoch && step < total_steps; ++b) {
      std::vector<VideoSample> batch;
      std::vector<bool> labels;
      for (std::size_t j = 0; j < layout.L; ++j) {
        const Video& v = dataset[order[(b * layout.L + j) % dataset.size()]];
        batch.push_back(sample_frames(
            v.frames, layout.N, Rng::mix(config.seed, (step << 8) | j)));
        labels.push_back(v.fake);
      }
      Misalignment mis;
      if (config.vaccinate)
        mis = to_misalignment(vaccinate_sample(config, vac_rng), layout);

      BatchGrads grads;
      const Real loss =
          batch_step(batch, labels, layout, model, config, mis, &grads);
      epoch_loss += loss;
      ++epoch_batches;

      std::vector<ParamSlot> params, gslots;
      if (!config.freeze_encoder) {
        auto ps = encoder_slots(model.encoder);
        auto gs = encoder_grad_slots(grads.enc);
        params.insert(params.end(), ps.begin(), ps.end());
        gslots.insert(gslots.end(), gs.begin(), gs.end());
      }
      if (!config.freeze_stack) {
        for (std::size_t k = 0; k < model.stack.K(); ++k) {
          params.push_back(
              {model.stack.layers[k].data(), model.stack.layers[k].size()});
          gslots.push_back({grads.theta[k].data(), grads.theta[k].size()});
        }
      }
      // Adam slot count must stay constant across steps; with everything
      // frozen there is nothing to update.
      if (!params.empty()) {
        const Real progress =
            static_cast<Real>(step) / static_cast<Real>(total_steps);
        const Real lr_scale =
            0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        opt.step(params, gslots, lr_scale);
      }
      ++step;
    }
    if (epoch_batches > 0)
      hist.epoch_loss.push_back(epoch_loss / static_cast<Real>(epoch_batches));
  }
  hist.steps = step;
  return hist;
}

TrainHistory fine_tune(HybridModel& model, const Dataset& dataset,
                       const MuxLayout& layout, const TrainConfig& config,
                       std::size_t original_steps) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("fine_tune: empty dataset");
  const auto budget = static_cast<std::size_t>(std::ceil(
      config.fine_tune_fraction * static_cast<Real>(original_steps)));
  return train(dataset, layout, model, config, budget);
}

EvalResult evaluate(const HybridModel& model, const Dataset& dataset,
                    const MuxLayout& layout, std::uint64_t seed,
                    std::size_t repeats, const Misalignment& mis,
                    const FrameTransform& transform) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalResult res;
  res.scores.resize(layout.L);
  res.labels.resize(layout.L);
  HybridModel m = model;  // decode path is const; copy keeps the API simple
  Rng shuffle_rng(Rng::mix(seed, 0xE7A1));
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batches = (dataset.size() + layout.L - 1) / layout.L;

  for (std::size_t rep = 0; rep < repeats; ++rep) {
    for (std::size_t i = order.size(); i-- > 1;)
      std::swap(order[i], order[shuffle_rng.below(i + 1)]);
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<VideoSample> batch;
      std::vector<bool> labels;
      for (std::size_t j = 0; j < layout.L; ++j) {
        const Video& v = dataset[order[(b * layout.L + j) % dataset.size()]];
        const std::vector<std::size_t> idx = sample_indices(
            v.frames.size(), layout.N,
            Rng::mix(seed, ((rep * batches + b) << 8) | j));
        VideoSample s;
        s.fake = v.fake;
        for (std::size_t fi : idx) {
          RealGrid frame = v.frames[fi];
          if (transform) frame = transform(frame);
          s.frames.push_back(standardize(frame));
        }
        batch.push_back(std::move(s));
        labels.push_back(v.fake);
      }
      const PhaseMap phi = forward_batch(batch, m.encoder, layout);
      const RealGrid img = decode(phi, m.stack, layout, mis);
      const std::vector<ChannelScore> scores = score_channels(img, layout, mis);
      for (std::size_t v = 0; v < layout.L; ++v) {
        res.scores[v].push_back(scores[v].score);
        res.labels[v].push_back(labels[v]);
      }
    }
  }
  return res;
}

GradCheckReport gradcheck(const HybridModel& model,
                          const std::vector<VideoSample>& batch,
                          const std::vector<bool>& labels,
                          const MuxLayout& layout, Real tau,
                          std::size_t probes_per_group, Real fd_step,
                          std::uint64_t seed) {
  TrainConfig cfg;
  cfg.temperature = tau;
  HybridModel work = model;
  BatchGrads grads;
  batch_step(batch, labels, layout, work, cfg, {}, &grads);

  auto loss_now = [&](HybridModel& m) {
    TrainConfig c;
    c.temperature = tau;
    return batch_step(batch, labels, layout, m, c, {}, nullptr);
  };
  auto rel_err = [](Real analytic, Real fd) {
    // The floor turns the comparison absolute for near-zero gradients,
    // keeping FD round-off from dominating the ratio.
    const Real denom = std::max({std::abs(analytic), std::abs(fd), 1e-6});
    return std::abs(analytic - fd) / denom;
  };

  Rng rng(Rng::mix(seed, 0x6C));
  GradCheckReport rep;

  // Encoder weights.
  {
    auto tensors = param_tensors(work.encoder);
    EncoderGrads& eg = grads.enc;
    auto gts = grad_tensors(eg);
    for (std::size_t k = 0; k < probes_per_group; ++k) {
      const std::size_t ti = rng.below(tensors.size());
      if (tensors[ti]->empty()) continue;
      const std::size_t ei = rng.below(tensors[ti]->size());
      Real& p = (*tensors[ti])[ei];
      const Real saved = p;
      p = saved + fd_step;
      const Real lp = loss_now(work);
      p = saved - fd_step;
      const Real lm = loss_now(work);
      p = saved;
      const Real fd = (lp - lm) / (2.0 * fd_step);
      rep.max_rel_error_encoder =
          std::max(rep.max_rel_error_encoder, rel_err((*gts[ti])[ei], fd));
    }
  }
  // Diffractive layer phases.
  for (std::size_t k = 0; work.stack.K() > 0 && k < probes_per_group; ++k) {
    const std::size_t li = rng.below(work.stack.K());
    const std::size_t ei = rng.below(work.stack.layers[li].size());
    Real& p = work.stack.layers[li].data()[ei];
    const Real saved = p;
    p = saved + fd_step;
    const Real lp = loss_now(work);
    p = saved - fd_step;
    const Real lm = loss_now(work);
    p = saved;
    const Real fd = (lp - lm) / (2.0 * fd_step);
    rep.max_rel_error_theta = std::max(
        rep.max_rel_error_theta, rel_err(grads.theta[li].data()[ei], fd));
  }
  // Phase seed Phi (decode path only).
  {
    std::vector<EncodeCache> caches;
    PhaseMap phi = forward_batch(batch, work.encoder, layout);
    DecodeCache dc;
    auto loss_of_phi = [&](const PhaseMap& pm) {
      const RealGrid img = decode(pm, work.stack, layout);
      const std::vector<ChannelScore> sc = score_channels(img, layout);
      std::vector<Real> raw(layout.L);
      for (std::size_t v = 0; v < layout.L; ++v) raw[v] = sc[v].score;
      return bce_loss(raw, labels, tau);
    };
    const RealGrid img = decode(phi, work.stack, layout, {}, &dc);
    const std::vector<ChannelScore> sc = score_channels(img, layout);
    std::vector<Real> raw(layout.L), dsc;
    for (std::size_t v = 0; v < layout.L; ++v) raw[v] = sc[v].score;
    bce_loss(raw, labels, tau, &dsc);
    const RealGrid d_img = sensor_cotangent(dsc, sc, layout, {});
    const DecodeGrads dg = decode_backward(d_img, work.stack, layout, dc);
    for (std::size_t k = 0; k < probes_per_group; ++k) {
      // Probe pixels inside occupied slots, where the gradient is live.
      const std::size_t v = rng.below(layout.L);
      const std::size_t i = rng.below(layout.N);
      const PixelRect slot = layout.frame_slot_rect(v, i);
      const std::size_t r = slot.row0 + rng.below(slot.rows);
      const std::size_t c = slot.col0 + rng.below(slot.cols);
      Real& p = phi.values(r, c);
      const Real saved = p;
      p = saved + fd_step;
      const Real lp = loss_of_phi(phi);
      p = saved - fd_step;
      const Real lm = loss_of_phi(phi);
      p = saved;
      const Real fd = (lp - lm) / (2.0 * fd_step);
      rep.max_rel_error_phi =
          std::max(rep.max_rel_error_phi, rel_err(dg.d_phi(r, c), fd));
    }
  }
  rep.max_rel_error =
      std::max({rep.max_rel_error_encoder, rep.max_rel_error_theta,
                rep.max_rel_error_phi});
  return rep;
}

}  // namespace muxdet
