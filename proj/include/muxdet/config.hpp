#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "muxdet/decoder.hpp"
#include "muxdet/encoder.hpp"
#include "muxdet/harness.hpp"
#include "muxdet/muxlayout.hpp"
#include "muxdet/trainer.hpp"

namespace muxdet {

struct SyntheticConfig {
  std::size_t videos = 32;          // half real, half fake
  std::size_t frames_per_video = 16;
  std::size_t frame_rows = 64, frame_cols = 64;
  Real signal_strength = 1.0;       // s in [0, 1]
  Real temporal_rho = 0.9;
  Real texture_sigma = 2.0;         // band-limiting blur of the texture
  Real artifact_amplitude = 0.08;   // artifact peak at s = 1
  Real artifact_period_px = 4.0;
  std::uint64_t seed = 1;
};

struct AttackConfig {
  std::size_t attackers = 10;
  std::vector<Real> epsilons = {1.0 / 255, 2.0 / 255, 4.0 / 255, 8.0 / 255};
  std::size_t epochs = 10;
  Real step_size = 0.0;        // 0 -> epsilon/4
  Real subset_fraction = 0.1;  // class-balanced |D^(m)|
  std::vector<std::size_t> surrogate_channels = {4, 8, 8, 8};
  std::size_t surrogate_epochs = 4;
};

struct HarnessConfig {
  std::vector<Real> noise_sigmas = {0.0, 0.05, 0.2, 0.5};
  std::vector<Real> blur_sigmas = {0.0, 0.5, 1.0, 2.0};
  std::vector<Real> jpeg_qualities = {100, 90, 50, 30, 10};
  std::vector<Real> lateral_grid_um = {-200, -100, 0, 100, 200};
  std::vector<Real> axial_grid_um = {0, 500, 1000, 2000};
  AttackConfig attack;
};

struct StackConfig {
  std::size_t K = 0;
  std::vector<Real> distances_um;  // K+1; defaults to layout distance
  Real init_scale = 0.5;           // uniform(-x, x) phase init
};

struct ExperimentConfig {
  MuxLayout layout;
  EncoderArch encoder;
  StackConfig stack;
  TrainConfig train;
  HarnessConfig harness;
  EnergyModel energy;
  SyntheticConfig dataset;
  std::string manifest_path;  // when set, ingest instead of synthesizing
  std::uint64_t seed = 1;
  std::string out_dir = "out";
};

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::string& path);

// Applies MUXDET_SECTION__KEY=value environment overrides onto the JSON
// form before parsing.
nlohmann::json apply_env_overrides(nlohmann::json j);

// FNV-1a over the canonical (sorted-key) JSON dump.
std::string config_hash(const ExperimentConfig& c);

std::vector<Real> stack_distances(const ExperimentConfig& c);

}  // namespace muxdet
