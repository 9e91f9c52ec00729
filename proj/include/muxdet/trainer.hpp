#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "muxdet/decoder.hpp"
#include "muxdet/encoder.hpp"
#include "muxdet/muxlayout.hpp"

namespace muxdet {

struct Video {
  std::vector<RealGrid> frames;  // canonical [0, 1] range
  bool fake = false;
  std::string id;
};

using Dataset = std::vector<Video>;

struct HybridModel {
  EncoderParams encoder;
  DiffractiveStack stack;
};

struct TrainConfig {
  Real temperature = 0.1;  // tau; training-time only
  Real learning_rate = 1e-3;
  Real weight_decay = 0.0;  // decoupled
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  bool vaccinate = false;
  Real lateral_max_um = 0.0;  // Delta_max
  Real axial_max_um = 0.0;    // Z_max
  Real fine_tune_fraction = 1.0;
  bool freeze_encoder = false;
  bool freeze_stack = false;

  void validate() const;
};

// Mean over channels of BCE between sigmoid(score/tau) and label (fake = 1).
Real bce_loss(const std::vector<Real>& scores, const std::vector<bool>& labels,
              Real tau, std::vector<Real>* d_scores = nullptr);

struct MisalignmentDraw {
  Real dx_um = 0.0, dy_um = 0.0, dz_um = 0.0;
};

class Rng;
MisalignmentDraw vaccinate_sample(const TrainConfig& config, Rng& rng);
Misalignment to_misalignment(const MisalignmentDraw& d,
                             const MuxLayout& layout);

struct TrainHistory {
  std::vector<Real> epoch_loss;
  std::size_t steps = 0;
};

TrainHistory train(const Dataset& dataset, const MuxLayout& layout,
                   HybridModel& model, const TrainConfig& config,
                   std::size_t step_budget = 0);  // 0 = epochs * batches

// Resumes from the given model for fine_tune_fraction of the original
// step budget.
TrainHistory fine_tune(HybridModel& model, const Dataset& dataset,
                       const MuxLayout& layout, const TrainConfig& config,
                       std::size_t original_steps);

// Optional raw-frame transform (perturbations) applied before
// standardization.
using FrameTransform = std::function<RealGrid(const RealGrid&)>;

struct EvalResult {
  std::vector<std::vector<Real>> scores;  // per channel
  std::vector<std::vector<bool>> labels;
};

EvalResult evaluate(const HybridModel& model, const Dataset& dataset,
                    const MuxLayout& layout, std::uint64_t seed,
                    std::size_t repeats = 1, const Misalignment& mis = {},
                    const FrameTransform& transform = nullptr);

struct GradCheckReport {
  Real max_rel_error = 0.0;
  Real max_rel_error_encoder = 0.0;
  Real max_rel_error_theta = 0.0;
  Real max_rel_error_phi = 0.0;
};

// Analytic vs central-finite-difference gradients of the loss on one batch.
GradCheckReport gradcheck(const HybridModel& model,
                          const std::vector<VideoSample>& batch,
                          const std::vector<bool>& labels,
                          const MuxLayout& layout, Real tau,
                          std::size_t probes_per_group = 6,
                          Real fd_step = 1e-5, std::uint64_t seed = 7);

}  // namespace muxdet
