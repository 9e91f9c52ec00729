#include "muxdet/config.hpp"

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

extern char** environ;

namespace muxdet {

using nlohmann::json;

namespace {

json layout_json(const MuxLayout& m) {
  return json{{"L", m.L},
              {"N", m.N},
              {"interp_factor", m.interp_factor},
              {"video_grid", {m.video_grid.rows, m.video_grid.cols}},
              {"frame_grid", {m.frame_grid.rows, m.frame_grid.cols}},
              {"tile", {m.tile_rows, m.tile_cols}},
              {"slm", {m.slm_rows, m.slm_cols}},
              {"slm_pitch_um", m.slm_pitch_um},
              {"sensor", {m.sensor_rows, m.sensor_cols}},
              {"sensor_pitch_um", m.sensor_pitch_um},
              {"sensor_scale", m.sensor_scale},
              {"wavelength_um", m.wavelength_um},
              {"propagation_distance_um", m.propagation_distance_um},
              {"detector", {{"rows", m.det_rows},
                            {"cols", m.det_cols},
                            {"gap", m.det_gap}}}};
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void get_shape(const json& j, const char* key, GridShape& s) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  s.rows = a.at(0).get<std::size_t>();
  s.cols = a.at(1).get<std::size_t>();
}

void get_pair(const json& j, const char* key, std::size_t& a,
              std::size_t& b) {
  if (!j.contains(key)) return;
  a = j.at(key).at(0).get<std::size_t>();
  b = j.at(key).at(1).get<std::size_t>();
}

MuxLayout layout_from(const json& j) {
  MuxLayout m;
  get_to(j, "L", m.L);
  get_to(j, "N", m.N);
  get_to(j, "interp_factor", m.interp_factor);
  get_shape(j, "video_grid", m.video_grid);
  get_shape(j, "frame_grid", m.frame_grid);
  get_pair(j, "tile", m.tile_rows, m.tile_cols);
  get_pair(j, "slm", m.slm_rows, m.slm_cols);
  get_to(j, "slm_pitch_um", m.slm_pitch_um);
  get_pair(j, "sensor", m.sensor_rows, m.sensor_cols);
  get_to(j, "sensor_pitch_um", m.sensor_pitch_um);
  get_to(j, "sensor_scale", m.sensor_scale);
  get_to(j, "wavelength_um", m.wavelength_um);
  get_to(j, "propagation_distance_um", m.propagation_distance_um);
  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    get_to(d, "rows", m.det_rows);
    get_to(d, "cols", m.det_cols);
    get_to(d, "gap", m.det_gap);
  }
  return m;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json j;
  j["layout"] = layout_json(c.layout);
  j["encoder"] = {{"tile", {c.encoder.tile_rows, c.encoder.tile_cols}},
                  {"channels", c.encoder.channels}};
  j["stack"] = {{"K", c.stack.K},
                {"distances_um", c.stack.distances_um},
                {"init_scale", c.stack.init_scale}};
  j["train"] = {{"temperature", c.train.temperature},
                {"learning_rate", c.train.learning_rate},
                {"weight_decay", c.train.weight_decay},
                {"epochs", c.train.epochs},
                {"seed", c.train.seed},
                {"vaccinate", c.train.vaccinate},
                {"lateral_max_um", c.train.lateral_max_um},
                {"axial_max_um", c.train.axial_max_um},
                {"fine_tune_fraction", c.train.fine_tune_fraction},
                {"freeze_encoder", c.train.freeze_encoder},
                {"freeze_stack", c.train.freeze_stack}};
  j["harness"] = {
      {"noise_sigmas", c.harness.noise_sigmas},
      {"blur_sigmas", c.harness.blur_sigmas},
      {"jpeg_qualities", c.harness.jpeg_qualities},
      {"lateral_grid_um", c.harness.lateral_grid_um},
      {"axial_grid_um", c.harness.axial_grid_um},
      {"attack",
       {{"attackers", c.harness.attack.attackers},
        {"epsilons", c.harness.attack.epsilons},
        {"epochs", c.harness.attack.epochs},
        {"step_size", c.harness.attack.step_size},
        {"subset_fraction", c.harness.attack.subset_fraction},
        {"surrogate_channels", c.harness.attack.surrogate_channels},
        {"surrogate_epochs", c.harness.attack.surrogate_epochs}}}};
  j["energy"] = {{"encoder_flops_per_frame", c.energy.encoder_flops_per_frame},
                 {"joules_per_flop", c.energy.joules_per_flop},
                 {"decoder_power_low_w", c.energy.decoder_power_low_w},
                 {"decoder_power_high_w", c.energy.decoder_power_high_w},
                 {"frame_rate_low_hz", c.energy.frame_rate_low_hz},
                 {"frame_rate_high_hz", c.energy.frame_rate_high_hz},
                 {"L", c.energy.L}};
  j["dataset"] = {{"videos", c.dataset.videos},
                  {"frames_per_video", c.dataset.frames_per_video},
                  {"frame", {c.dataset.frame_rows, c.dataset.frame_cols}},
                  {"signal_strength", c.dataset.signal_strength},
                  {"temporal_rho", c.dataset.temporal_rho},
                  {"texture_sigma", c.dataset.texture_sigma},
                  {"artifact_amplitude", c.dataset.artifact_amplitude},
                  {"artifact_period_px", c.dataset.artifact_period_px},
                  {"seed", c.dataset.seed}};
  j["manifest_path"] = c.manifest_path;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("layout")) c.layout = layout_from(j.at("layout"));
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    get_pair(e, "tile", c.encoder.tile_rows, c.encoder.tile_cols);
    get_to(e, "channels", c.encoder.channels);
  } else {
    c.encoder.tile_rows = c.layout.tile_rows;
    c.encoder.tile_cols = c.layout.tile_cols;
  }
  if (j.contains("stack")) {
    const auto& s = j.at("stack");
    get_to(s, "K", c.stack.K);
    get_to(s, "distances_um", c.stack.distances_um);
    get_to(s, "init_scale", c.stack.init_scale);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    get_to(t, "temperature", c.train.temperature);
    get_to(t, "learning_rate", c.train.learning_rate);
    get_to(t, "weight_decay", c.train.weight_decay);
    get_to(t, "epochs", c.train.epochs);
    get_to(t, "seed", c.train.seed);
    get_to(t, "vaccinate", c.train.vaccinate);
    get_to(t, "lateral_max_um", c.train.lateral_max_um);
    get_to(t, "axial_max_um", c.train.axial_max_um);
    get_to(t, "fine_tune_fraction", c.train.fine_tune_fraction);
    get_to(t, "freeze_encoder", c.train.freeze_encoder);
    get_to(t, "freeze_stack", c.train.freeze_stack);
  }
  if (j.contains("harness")) {
    const auto& h = j.at("harness");
    get_to(h, "noise_sigmas", c.harness.noise_sigmas);
    get_to(h, "blur_sigmas", c.harness.blur_sigmas);
    get_to(h, "jpeg_qualities", c.harness.jpeg_qualities);
    get_to(h, "lateral_grid_um", c.harness.lateral_grid_um);
    get_to(h, "axial_grid_um", c.harness.axial_grid_um);
    if (h.contains("attack")) {
      const auto& a = h.at("attack");
      get_to(a, "attackers", c.harness.attack.attackers);
      get_to(a, "epsilons", c.harness.attack.epsilons);
      get_to(a, "epochs", c.harness.attack.epochs);
      get_to(a, "step_size", c.harness.attack.step_size);
      get_to(a, "subset_fraction", c.harness.attack.subset_fraction);
      get_to(a, "surrogate_channels", c.harness.attack.surrogate_channels);
      get_to(a, "surrogate_epochs", c.harness.attack.surrogate_epochs);
    }
  }
  if (j.contains("energy")) {
    const auto& e = j.at("energy");
    get_to(e, "encoder_flops_per_frame", c.energy.encoder_flops_per_frame);
    get_to(e, "joules_per_flop", c.energy.joules_per_flop);
    get_to(e, "decoder_power_low_w", c.energy.decoder_power_low_w);
    get_to(e, "decoder_power_high_w", c.energy.decoder_power_high_w);
    get_to(e, "frame_rate_low_hz", c.energy.frame_rate_low_hz);
    get_to(e, "frame_rate_high_hz", c.energy.frame_rate_high_hz);
    get_to(e, "L", c.energy.L);
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    get_to(d, "videos", c.dataset.videos);
    get_to(d, "frames_per_video", c.dataset.frames_per_video);
    get_pair(d, "frame", c.dataset.frame_rows, c.dataset.frame_cols);
    get_to(d, "signal_strength", c.dataset.signal_strength);
    get_to(d, "temporal_rho", c.dataset.temporal_rho);
    get_to(d, "texture_sigma", c.dataset.texture_sigma);
    get_to(d, "artifact_amplitude", c.dataset.artifact_amplitude);
    get_to(d, "artifact_period_px", c.dataset.artifact_period_px);
    get_to(d, "seed", c.dataset.seed);
  }
  get_to(j, "manifest_path", c.manifest_path);
  get_to(j, "seed", c.seed);
  get_to(j, "out_dir", c.out_dir);
  return c;
}

json apply_env_overrides(json j) {
  const std::string prefix = "MUXDET_";
  for (char** e = environ; *e != nullptr; ++e) {
    std::string entry = *e;
    if (entry.rfind(prefix, 0) != 0) continue;
    auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(prefix.size(), eq - prefix.size());
    std::string value = entry.substr(eq + 1);
    // SECTION__KEY -> path segments, lower-cased.
    std::vector<std::string> path;
    std::size_t pos = 0;
    while (pos <= key.size()) {
      auto next = key.find("__", pos);
      std::string seg = key.substr(pos, next == std::string::npos
                                            ? std::string::npos
                                            : next - pos);
      for (auto& ch : seg) ch = static_cast<char>(std::tolower(ch));
      path.push_back(seg);
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    // Prefer an existing key that matches case-insensitively (config keys
    // like "K" are uppercase; env segments arrive upper-cased anyway).
    auto resolve = [](const json& node, std::string seg) {
      if (node.is_object())
        for (auto it = node.begin(); it != node.end(); ++it) {
          if (it.key().size() != seg.size()) continue;
          bool same = true;
          for (std::size_t k = 0; k < seg.size(); ++k)
            same = same && std::tolower(it.key()[k]) == std::tolower(seg[k]);
          if (same) return it.key();
        }
      return seg;
    };
    json* node = &j;
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      node = &(*node)[resolve(*node, path[i])];
    json parsed = json::parse(value, nullptr, false);
    (*node)[resolve(*node, path.back())] =
        parsed.is_discarded() ? json(value) : parsed;
  }
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j = json::parse(in);
  return config_from_json(apply_env_overrides(std::move(j)));
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string dump = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

std::vector<Real> stack_distances(const ExperimentConfig& c) {
  std::vector<Real> d = c.stack.distances_um;
  if (d.empty()) {
    // Single-hop default; extra hops split the same total evenly.
    d.assign(c.stack.K + 1,
             c.layout.propagation_distance_um / Real(c.stack.K + 1));
  }
  if (d.size() != c.stack.K + 1)
    throw std::invalid_argument("stack.distances_um must have K+1 entries");
  return d;
}

}  // namespace muxdet
