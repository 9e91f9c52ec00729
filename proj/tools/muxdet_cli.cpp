// Command-line front end: dataset generation, training, evaluation, sweeps,
// attacks, crosstalk and energy reports. Exit codes: 0 ok, 1 runtime
// failure, 2 bad usage or config.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "muxdet/checkpoint.hpp"
#include "muxdet/config.hpp"
#include "muxdet/dataset_io.hpp"
#include "muxdet/decoder.hpp"
#include "muxdet/encoder.hpp"
#include "muxdet/framenet.hpp"
#include "muxdet/harness.hpp"
#include "muxdet/metrics.hpp"
#include "muxdet/rng.hpp"
#include "muxdet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace muxdet;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
  int threads = 1;  // reserved; all compute paths are single-threaded
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path);
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ",";
      out_ << csv_field(fields[i]);
    }
    out_ << "\r\n";
  }

 private:
  std::ofstream out_;
};

std::string num(Real v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

ExperimentConfig load(const GlobalOpts& g) {
  ExperimentConfig cfg = g.config_path.empty()
                             ? config_from_json(apply_env_overrides(json::object()))
                             : load_config(g.config_path);
  // --seed steers the run (init, training, eval sampling) but not the
  // dataset identity; set dataset.seed in the config to change the corpus.
  if (g.seed_set) {
    cfg.seed = g.seed;
    cfg.train.seed = g.seed;
  }
  if (!g.out_override.empty()) cfg.out_dir = g.out_override;
  cfg.layout.validate();
  cfg.train.validate();
  cfg.energy.validate();
  return cfg;
}

void guard_output(const fs::path& p, bool force) {
  if (fs::exists(p) && !force)
    throw std::invalid_argument(p.string() +
                                " exists; pass --force to overwrite");
}

void write_run_record(const ExperimentConfig& cfg, const std::string& command,
                      bool force) {
  fs::create_directories(cfg.out_dir);
  fs::path p = fs::path(cfg.out_dir) / ("run_" + command + ".json");
  guard_output(p, force || true);  // run records are always refreshed
  std::ofstream out(p);
  out << json{{"command", command},
              {"config_hash", config_hash(cfg)},
              {"seed", cfg.seed}}
             .dump(2)
      << "\n";
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (!cfg.manifest_path.empty()) return ingest(cfg.manifest_path);
  return make_synthetic_dataset(cfg.dataset);
}

HybridModel build_model(const ExperimentConfig& cfg) {
  HybridModel model;
  EncoderArch arch = cfg.encoder;
  arch.tile_rows = cfg.layout.tile_rows;
  arch.tile_cols = cfg.layout.tile_cols;
  model.encoder = init_encoder(arch, cfg.dataset.frame_rows,
                               cfg.dataset.frame_cols, cfg.seed);
  model.stack = make_stack(cfg.stack.K, cfg.layout, stack_distances(cfg),
                           cfg.seed + 1, cfg.stack.init_scale);
  return model;
}

void report_to_json(const ChannelReport& rep, json& j) {
  j["accuracy"] = {{"mean", rep.accuracy.mean}, {"std", rep.accuracy.stddev}};
  j["sensitivity"] = {{"mean", rep.sensitivity.mean},
                      {"std", rep.sensitivity.stddev}};
  j["specificity"] = {{"mean", rep.specificity.mean},
                      {"std", rep.specificity.stddev}};
  j["ks"] = {{"mean", rep.ks.mean}, {"std", rep.ks.stddev}};
  auto& ch = j["channels"] = json::array();
  for (const auto& m : rep.channels) {
    json e{{"v", m.v}, {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn},
           {"fn", m.fn}};
    if (m.accuracy) e["accuracy"] = *m.accuracy;
    if (m.sensitivity) e["sensitivity"] = *m.sensitivity;
    if (m.specificity) e["specificity"] = *m.specificity;
    if (m.auroc) e["auroc"] = *m.auroc;
    if (m.ks) e["ks"] = *m.ks;
    ch.push_back(std::move(e));
  }
}

void sweep_csv(const std::string& path, const std::string& mag_name,
               const std::vector<SweepRow>& rows) {
  CsvWriter csv(path);
  csv.row({mag_name, "accuracy_mean", "accuracy_std", "sensitivity_mean",
           "sensitivity_std", "specificity_mean", "specificity_std",
           "ks_mean", "ks_std"});
  for (const auto& r : rows)
    csv.row({num(r.magnitude), num(r.report.accuracy.mean),
             num(r.report.accuracy.stddev), num(r.report.sensitivity.mean),
             num(r.report.sensitivity.stddev), num(r.report.specificity.mean),
             num(r.report.specificity.stddev), num(r.report.ks.mean),
             num(r.report.ks.stddev)});
}

int cmd_gen_data(const GlobalOpts& g) {
  ExperimentConfig cfg = load(g);
  fs::path out = fs::path(cfg.out_dir) / "dataset";
  guard_output(out / "manifest.json", g.force);
  std::string mpath = gen_synthetic(cfg.dataset, out.string());
  write_run_record(cfg, "gen-data", g.force);
  std::cout << "wrote " << mpath << "\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, bool finetune, const std::string& ckpt_in,
              std::size_t original_steps) {
  ExperimentConfig cfg = load(g);
  Dataset data = load_dataset(cfg);
  fs::create_directories(cfg.out_dir);
  fs::path ckpt = fs::path(cfg.out_dir) /
                  (finetune ? "checkpoint_finetuned.bin" : "checkpoint.bin");
  guard_output(ckpt, g.force);

  HybridModel model;
  TrainHistory hist;
  if (finetune) {
    model = load_checkpoint(ckpt_in);
    hist = fine_tune(model, data, cfg.layout, cfg.train, original_steps);
  } else {
    model = build_model(cfg);
    hist = train(data, cfg.layout, model, cfg.train);
  }
  save_checkpoint(ckpt.string(), model);

  fs::path hpath = fs::path(cfg.out_dir) /
                   (finetune ? "history_finetuned.json" : "history.json");
  std::ofstream hout(hpath);
  hout << json{{"epoch_loss", hist.epoch_loss},
               {"steps", hist.steps},
               {"config_hash", config_hash(cfg)}}
              .dump(2)
       << "\n";
  write_run_record(cfg, finetune ? "finetune" : "train", g.force);
  std::cout << "wrote " << ckpt.string() << " (" << hist.steps
            << " steps)\n";
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& ckpt_in,
             std::size_t repeats) {
  ExperimentConfig cfg = load(g);
  Dataset data = load_dataset(cfg);
  HybridModel model = load_checkpoint(ckpt_in);
  EvalResult res = evaluate(model, data, cfg.layout, cfg.seed, repeats);
  ChannelReport rep = channel_report(res.scores, res.labels);

  fs::create_directories(cfg.out_dir);
  fs::path mpath = fs::path(cfg.out_dir) / "metrics.json";
  guard_output(mpath, g.force);
  json j;
  j["config_hash"] = config_hash(cfg);
  report_to_json(rep, j);
  std::ofstream mout(mpath);
  mout << j.dump(2) << "\n";

  std::vector<Real> real_scores, fake_scores;
  for (std::size_t v = 0; v < res.scores.size(); ++v)
    for (std::size_t i = 0; i < res.scores[v].size(); ++i)
      (res.labels[v][i] ? fake_scores : real_scores)
          .push_back(res.scores[v][i]);
  DistributionTables tables =
      export_distributions(real_scores, fake_scores, 32);
  fs::path dpath = fs::path(cfg.out_dir) / "distributions.csv";
  guard_output(dpath, g.force);
  CsvWriter csv(dpath.string());
  csv.row({"bin_lo", "bin_hi", "real_count", "fake_count"});
  for (std::size_t b = 0; b + 1 < tables.bin_edges.size(); ++b)
    csv.row({num(tables.bin_edges[b]), num(tables.bin_edges[b + 1]),
             std::to_string(tables.real_counts[b]),
             std::to_string(tables.fake_counts[b])});
  write_run_record(cfg, "eval", g.force);
  std::cout << "accuracy " << rep.accuracy.mean << " +/- "
            << rep.accuracy.stddev << "\n";
  return 0;
}

int cmd_sweep_degrade(const GlobalOpts& g, const std::string& ckpt_in,
                      const std::string& kind_name) {
  ExperimentConfig cfg = load(g);
  Dataset data = load_dataset(cfg);
  HybridModel model = load_checkpoint(ckpt_in);

  PerturbKind kind;
  const std::vector<Real>* mags;
  if (kind_name == "noise") {
    kind = PerturbKind::gaussian_noise;
    mags = &cfg.harness.noise_sigmas;
  } else if (kind_name == "blur") {
    kind = PerturbKind::gaussian_blur;
    mags = &cfg.harness.blur_sigmas;
  } else if (kind_name == "jpeg") {
    kind = PerturbKind::jpeg;
    mags = &cfg.harness.jpeg_qualities;
  } else {
    throw std::invalid_argument("unknown degradation kind: " + kind_name);
  }

  auto rows = degradation_sweep(model, data, cfg.layout, kind, *mags,
                                cfg.seed);
  fs::create_directories(cfg.out_dir);
  fs::path p = fs::path(cfg.out_dir) / ("sweep_" + kind_name + ".csv");
  guard_output(p, g.force);
  sweep_csv(p.string(), kind_name == "jpeg" ? "quality" : "sigma", rows);
  write_run_record(cfg, "sweep-degrade", g.force);
  std::cout << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_sweep_misalign(const GlobalOpts& g, const std::string& ckpt_in) {
  ExperimentConfig cfg = load(g);
  Dataset data = load_dataset(cfg);
  HybridModel model = load_checkpoint(ckpt_in);

  std::vector<MisalignmentDraw> grid;
  for (Real lat : cfg.harness.lateral_grid_um)
    grid.push_back({lat, lat, 0.0});
  for (Real ax : cfg.harness.axial_grid_um) grid.push_back({0.0, 0.0, ax});

  auto rows = misalignment_sweep(model, data, cfg.layout, grid, cfg.seed);
  fs::create_directories(cfg.out_dir);
  fs::path p = fs::path(cfg.out_dir) / "sweep_misalign.csv";
  guard_output(p, g.force);
  CsvWriter csv(p.string());
  csv.row({"dx_um", "dy_um", "dz_um", "accuracy_mean", "accuracy_std",
           "ks_mean", "ks_std"});
  for (const auto& r : rows)
    csv.row({num(r.draw.dx_um), num(r.draw.dy_um), num(r.draw.dz_um),
             num(r.report.accuracy.mean), num(r.report.accuracy.stddev),
             num(r.report.ks.mean), num(r.report.ks.stddev)});
  write_run_record(cfg, "sweep-misalign", g.force);
  std::cout << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_attack(const GlobalOpts& g, const std::string& ckpt_in) {
  ExperimentConfig cfg = load(g);
  Dataset data = load_dataset(cfg);
  const AttackConfig& ac = cfg.harness.attack;

  // Digital baseline doubles as every attacker's surrogate.
  FrameNet surrogate = init_framenet(ac.surrogate_channels,
                                     cfg.dataset.frame_rows,
                                     cfg.dataset.frame_cols, cfg.seed + 2);
  train_framenet(surrogate, data, ac.surrogate_epochs, 1e-3, cfg.seed + 3);

  std::vector<Victim> victims;
  Victim hybrid;
  hybrid.name = "hybrid";
  hybrid.is_hybrid = true;
  hybrid.hybrid = load_checkpoint(ckpt_in);
  victims.push_back(std::move(hybrid));
  Victim digital;
  digital.name = "digital";
  digital.is_hybrid = false;
  digital.digital = surrogate;
  victims.push_back(std::move(digital));

  std::vector<std::pair<Real, std::vector<RealGrid>>> deltas_by_eps;
  for (Real eps : ac.epsilons) {
    std::vector<RealGrid> deltas;
    for (std::size_t m = 1; m <= ac.attackers; ++m) {
      AttackSpec spec;
      spec.attacker_id = m;
      spec.seed = Rng::mix(cfg.seed, 1000 + m);
      spec.epsilon = eps;
      spec.epochs = ac.epochs;
      spec.step_size = ac.step_size;
      Dataset subset =
          attacker_subset(data, ac.subset_fraction, spec.seed);
      deltas.push_back(attack_train(spec, surrogate, subset));
    }
    deltas_by_eps.emplace_back(eps, std::move(deltas));
  }

  auto cells = attack_eval(victims, deltas_by_eps, data, cfg.layout,
                           cfg.seed);
  fs::create_directories(cfg.out_dir);
  fs::path p = fs::path(cfg.out_dir) / "attack.csv";
  guard_output(p, g.force);
  CsvWriter csv(p.string());
  csv.row({"epsilon", "model", "mean_accuracy"});
  for (const auto& c : cells)
    csv.row({num(c.epsilon), c.model, num(c.mean_accuracy)});
  write_run_record(cfg, "attack", g.force);
  std::cout << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_crosstalk(const GlobalOpts& g, const std::string& ckpt_in) {
  ExperimentConfig cfg = load(g);
  DiffractiveStack stack =
      ckpt_in.empty() ? make_stack(cfg.stack.K, cfg.layout,
                                   stack_distances(cfg), cfg.seed + 1,
                                   cfg.stack.init_scale)
                      : load_checkpoint(ckpt_in).stack;
  auto matrix = crosstalk_matrix(cfg.layout, stack);
  fs::create_directories(cfg.out_dir);
  fs::path p = fs::path(cfg.out_dir) / "crosstalk.csv";
  guard_output(p, g.force);
  CsvWriter csv(p.string());
  std::vector<std::string> header{"excited_tile"};
  for (std::size_t v = 0; v < cfg.layout.L; ++v)
    header.push_back("ch" + std::to_string(v));
  csv.row(header);
  for (std::size_t u = 0; u < matrix.size(); ++u) {
    std::vector<std::string> row{std::to_string(u)};
    for (Real x : matrix[u]) row.push_back(num(x));
    csv.row(row);
  }
  write_run_record(cfg, "crosstalk", g.force);
  std::cout << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_energy(const GlobalOpts& g) {
  ExperimentConfig cfg = load(g);
  HybridModel model = build_model(cfg);
  const Real measured = Real(flops_encode_frame(model.encoder));
  EnergyReport rep = energy_report(cfg.energy, cfg.layout, model.stack);
  EnergyReport rep_measured =
      energy_report(cfg.energy, cfg.layout, model.stack, measured);
  json j{{"encoder_mj_per_video", rep.encoder_mj_per_video},
         {"encoder_mj_per_video_measured",
          rep_measured.encoder_mj_per_video},
         {"decoder_batch_mj_low", rep.decoder_batch_mj_low},
         {"decoder_batch_mj_high", rep.decoder_batch_mj_high},
         {"decoder_video_mj_low", rep.decoder_video_mj_low},
         {"decoder_video_mj_high", rep.decoder_video_mj_high},
         {"twin_decoder_mj_per_batch", rep.twin_decoder_mj_per_batch},
         {"encoder_flops_per_frame_measured", measured},
         {"decoder_flops_per_inference",
          Real(flops_decode(cfg.layout, model.stack))},
         {"config_hash", config_hash(cfg)}};
  fs::create_directories(cfg.out_dir);
  fs::path p = fs::path(cfg.out_dir) / "energy.json";
  guard_output(p, g.force);
  std::ofstream out(p);
  out << j.dump(2) << "\n";
  write_run_record(cfg, "energy", g.force);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_export_figures(const GlobalOpts& g, const std::string& ckpt_in) {
  ExperimentConfig cfg = load(g);
  Dataset data = load_dataset(cfg);
  HybridModel model = load_checkpoint(ckpt_in);
  EvalResult res = evaluate(model, data, cfg.layout, cfg.seed);
  std::vector<Real> real_scores, fake_scores;
  for (std::size_t v = 0; v < res.scores.size(); ++v)
    for (std::size_t i = 0; i < res.scores[v].size(); ++i)
      (res.labels[v][i] ? fake_scores : real_scores)
          .push_back(res.scores[v][i]);
  DistributionTables t = export_distributions(real_scores, fake_scores, 64);
  fs::create_directories(cfg.out_dir);
  fs::path hp = fs::path(cfg.out_dir) / "score_hist.csv";
  fs::path cp = fs::path(cfg.out_dir) / "score_cdf.csv";
  guard_output(hp, g.force);
  guard_output(cp, g.force);
  {
    CsvWriter csv(hp.string());
    csv.row({"bin_lo", "bin_hi", "real_count", "fake_count"});
    for (std::size_t b = 0; b + 1 < t.bin_edges.size(); ++b)
      csv.row({num(t.bin_edges[b]), num(t.bin_edges[b + 1]),
               std::to_string(t.real_counts[b]),
               std::to_string(t.fake_counts[b])});
  }
  {
    CsvWriter csv(cp.string());
    csv.row({"score", "real_cdf", "fake_cdf"});
    for (std::size_t i = 0; i < t.cdf_points.size(); ++i)
      csv.row({num(t.cdf_points[i]), num(t.real_cdf[i]),
               num(t.fake_cdf[i])});
  }
  write_run_record(cfg, "export-figures", g.force);
  std::cout << "wrote " << hp.string() << " and " << cp.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially multiplexed hybrid digital-optical video "
               "classification: simulator, trainer and evaluation harness"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand name

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON experiment config");
  app.add_option("--out", g.out_override, "output directory override");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "seed override (config + train)");
  app.add_flag("--force", g.force, "overwrite existing outputs");
  app.add_option("--threads", g.threads,
                 "worker threads (reserved; compute is single-threaded)")
      ->check(CLI::PositiveNumber);

  std::string ckpt = "out/checkpoint.bin";
  std::string kind = "noise";
  std::size_t repeats = 1, steps = 0;

  app.add_subcommand("gen-data", "synthesize the PGM corpus + manifest");
  auto* train_cmd = app.add_subcommand("train", "train the hybrid model");
  (void)train_cmd;
  auto* ft = app.add_subcommand("finetune", "resume for a fraction of the "
                                            "original step budget");
  ft->add_option("--checkpoint", ckpt, "input checkpoint")->required();
  ft->add_option("--steps", steps, "original training step count")
      ->required();
  auto* ev = app.add_subcommand("eval", "metrics + score distributions");
  ev->add_option("--checkpoint", ckpt, "input checkpoint")->required();
  ev->add_option("--repeats", repeats, "frame-sampling repeats");
  auto* sd = app.add_subcommand("sweep-degrade", "degradation robustness");
  sd->add_option("--checkpoint", ckpt, "input checkpoint")->required();
  sd->add_option("--kind", kind, "noise | blur | jpeg")->required();
  auto* sm = app.add_subcommand("sweep-misalign", "misalignment robustness");
  sm->add_option("--checkpoint", ckpt, "input checkpoint")->required();
  auto* at = app.add_subcommand("attack", "universal perturbation attack");
  at->add_option("--checkpoint", ckpt, "input checkpoint")->required();
  auto* ct = app.add_subcommand("crosstalk", "channel crosstalk matrix");
  ct->add_option("--checkpoint", ckpt, "optional checkpoint (else fresh "
                                       "stack)");
  app.add_subcommand("energy", "energy model report");
  auto* xf = app.add_subcommand("export-figures", "histogram + CDF tables");
  xf->add_option("--checkpoint", ckpt, "input checkpoint")->required();

  std::string ct_ckpt;  // crosstalk: checkpoint is optional
  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;
  if (ct->parsed() && ct->count("--checkpoint") > 0) ct_ckpt = ckpt;

  try {
    if (app.got_subcommand("gen-data")) return cmd_gen_data(g);
    if (app.got_subcommand("train")) return cmd_train(g, false, "", 0);
    if (app.got_subcommand("finetune")) return cmd_train(g, true, ckpt, steps);
    if (app.got_subcommand("eval")) return cmd_eval(g, ckpt, repeats);
    if (app.got_subcommand("sweep-degrade"))
      return cmd_sweep_degrade(g, ckpt, kind);
    if (app.got_subcommand("sweep-misalign"))
      return cmd_sweep_misalign(g, ckpt);
    if (app.got_subcommand("attack")) return cmd_attack(g, ckpt);
    if (app.got_subcommand("crosstalk")) return cmd_crosstalk(g, ct_ckpt);
    if (app.got_subcommand("energy")) return cmd_energy(g);
    if (app.got_subcommand("export-figures"))
      return cmd_export_figures(g, ckpt);
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}
