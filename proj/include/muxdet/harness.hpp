#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "muxdet/framenet.hpp"
#include "muxdet/metrics.hpp"
#include "muxdet/trainer.hpp"

namespace muxdet {

enum class PerturbKind { gaussian_noise, gaussian_blur, jpeg };

struct Perturbation {
  PerturbKind kind = PerturbKind::gaussian_noise;
  Real magnitude = 0.0;   // sigma (noise: intensity, blur: pixels) or Q
  std::uint64_t seed = 0; // noise only
};

// Frames live in the canonical [0, 1] domain; callers re-standardize after.
std::vector<RealGrid> perturb(const std::vector<RealGrid>& frames,
                              const Perturbation& p);

// Self-contained JPEG-style degradation: 8x8 DCT, standard luminance
// quantization table, IJG quality scaling, quantize-dequantize only.
RealGrid jpeg_roundtrip(const RealGrid& frame, int quality);

struct SweepRow {
  Real magnitude = 0.0;
  ChannelReport report;
};

std::vector<SweepRow> degradation_sweep(const HybridModel& model,
                                        const Dataset& testset,
                                        const MuxLayout& layout,
                                        PerturbKind kind,
                                        const std::vector<Real>& magnitudes,
                                        std::uint64_t seed,
                                        std::size_t repeats = 1);

struct MisalignRow {
  MisalignmentDraw draw;
  ChannelReport report;
};

std::vector<MisalignRow> misalignment_sweep(
    const HybridModel& model, const Dataset& testset, const MuxLayout& layout,
    const std::vector<MisalignmentDraw>& grid, std::uint64_t seed,
    std::size_t repeats = 1);

struct AttackSpec {
  std::size_t attacker_id = 1;  // 1..10
  std::uint64_t seed = 0;
  Real epsilon = 8.0 / 255.0;
  std::size_t epochs = 10;      // E
  Real step_size = 0.0;         // alpha; 0 -> epsilon/4
  std::size_t batch_frames = 4; // frames per PGD step
};

// Universal perturbation via PGD ascent of the surrogate BCE on the
// attacker's subset. ||delta||_inf <= epsilon holds bit-exactly.
RealGrid attack_train(const AttackSpec& spec, const FrameNet& surrogate,
                      const Dataset& attacker_subset);

// Class-balanced fraction of the dataset, distinct per attacker seed.
Dataset attacker_subset(const Dataset& dataset, Real fraction,
                        std::uint64_t seed);

struct Victim {
  std::string name;
  bool is_hybrid = true;
  HybridModel hybrid;
  FrameNet digital;
};

// Overall accuracy of a victim on the testset with frames transformed
// (e.g. stamped with delta and clamped to [0, 1]).
Real victim_accuracy(const Victim& victim, const Dataset& testset,
                     const MuxLayout& layout, std::uint64_t seed,
                     const FrameTransform& transform = nullptr);

struct AttackCell {
  Real epsilon = 0.0;
  std::string model;
  Real mean_accuracy = 0.0;  // averaged over attackers
};

std::vector<AttackCell> attack_eval(
    const std::vector<Victim>& victims,
    const std::vector<std::pair<Real, std::vector<RealGrid>>>& deltas_by_eps,
    const Dataset& testset, const MuxLayout& layout, std::uint64_t seed);

struct EnergyModel {
  Real encoder_flops_per_frame = 2.7e9;
  Real joules_per_flop = 5.5e-12;
  Real decoder_power_low_w = 3.73, decoder_power_high_w = 7.40;
  Real frame_rate_low_hz = 120.0, frame_rate_high_hz = 180.0;
  std::size_t L = 15;

  void validate() const;
};

struct EnergyReport {
  Real encoder_mj_per_video = 0.0;
  Real decoder_batch_mj_low = 0.0, decoder_batch_mj_high = 0.0;
  Real decoder_video_mj_low = 0.0, decoder_video_mj_high = 0.0;
  Real twin_decoder_mj_per_batch = 0.0;
};

EnergyReport energy_report(const EnergyModel& model, const MuxLayout& layout,
                           const DiffractiveStack& stack,
                           Real flops_per_frame_measured = 0.0);

}  // namespace muxdet
