#include "muxdet/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "muxdet/imageops.hpp"
#include "muxdet/rng.hpp"

namespace fs = std::filesystem;

namespace muxdet {

namespace {

// Zero-mean, roughly unit-variance band-limited texture.
RealGrid texture(std::size_t rows, std::size_t cols, Real sigma, Rng& rng) {
  RealGrid t(rows, cols);
  for (auto& v : t) v = rng.normal();
  t = gaussian_blur(t, sigma);
  Real ss = 0.0;
  for (Real v : t) ss += v * v;
  Real std = std::sqrt(ss / Real(t.size()));
  if (std > 0) {
    for (auto& v : t) v /= std;
  }
  return t;
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.videos == 0 || cfg.frames_per_video == 0 || cfg.frame_rows == 0 ||
      cfg.frame_cols == 0)
    throw std::invalid_argument("synthetic dataset dimensions must be > 0");
  if (cfg.signal_strength < 0.0 || cfg.signal_strength > 1.0)
    throw std::invalid_argument("signal_strength must be in [0, 1]");

  const Real s = cfg.signal_strength;
  const Real wave = 2.0 * std::numbers::pi / cfg.artifact_period_px;

  Dataset out;
  out.reserve(cfg.videos);
  for (std::size_t v = 0; v < cfg.videos; ++v) {
    const bool fake = (v % 2) == 1;
    Rng rng(Rng::mix(cfg.seed, v));
    const Real rho =
        fake ? cfg.temporal_rho * (1.0 - 0.3 * s) : cfg.temporal_rho;
    const Real phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Real phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);

    Video video;
    video.fake = fake;
    std::ostringstream id;
    id << (fake ? "fake_" : "real_") << v;
    video.id = id.str();

    RealGrid state = texture(cfg.frame_rows, cfg.frame_cols,
                             cfg.texture_sigma, rng);
    for (std::size_t t = 0; t < cfg.frames_per_video; ++t) {
      if (t > 0) {
        RealGrid innov = texture(cfg.frame_rows, cfg.frame_cols,
                                 cfg.texture_sigma, rng);
        const Real mix = std::sqrt(std::max(0.0, 1.0 - rho * rho));
        for (std::size_t k = 0; k < state.size(); ++k)
          state.data()[k] = rho * state.data()[k] + mix * innov.data()[k];
      }
      RealGrid frame(cfg.frame_rows, cfg.frame_cols);
      for (std::size_t r = 0; r < frame.rows(); ++r)
        for (std::size_t c = 0; c < frame.cols(); ++c) {
          Real px = 0.5 + 0.15 * state(r, c);
          if (fake)
            px += s * cfg.artifact_amplitude *
                  std::sin(wave * Real(r) + phase_x) *
                  std::sin(wave * Real(c) + phase_y);
          frame(r, c) = std::clamp(px, 0.0, 1.0);
        }
      video.frames.push_back(std::move(frame));
    }
    out.push_back(std::move(video));
  }
  return out;
}

void write_pgm(const std::string& path, const RealGrid& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  for (Real v : img) {
    const int q = int(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    out.put(static_cast<char>(q));
  }
  if (!out) throw std::runtime_error("short write: " + path);
}

RealGrid read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error(path + ": not a binary PGM");
  std::size_t cols = 0, rows = 0;
  int maxval = 0;
  in >> cols >> rows >> maxval;
  if (!in || rows == 0 || cols == 0 || maxval != 255)
    throw std::runtime_error(path + ": unsupported PGM header");
  in.get();  // single whitespace after maxval
  RealGrid img(rows, cols);
  std::vector<unsigned char> buf(rows * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!in) throw std::runtime_error(path + ": truncated pixel data");
  for (std::size_t k = 0; k < buf.size(); ++k)
    img.data()[k] = Real(buf[k]) / 255.0;
  return img;
}

std::string gen_synthetic(const SyntheticConfig& cfg,
                          const std::string& out_dir) {
  Dataset data = make_synthetic_dataset(cfg);
  fs::create_directories(out_dir);

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["frame_rows"] = cfg.frame_rows;
  manifest["frame_cols"] = cfg.frame_cols;
  auto& entries = manifest["videos"] = nlohmann::json::array();

  for (const auto& video : data) {
    fs::path dir = fs::path(out_dir) / video.id;
    fs::create_directories(dir);
    for (std::size_t t = 0; t < video.frames.size(); ++t) {
      std::ostringstream name;
      name << "frame_" << std::setw(4) << std::setfill('0') << t << ".pgm";
      write_pgm((dir / name.str()).string(), video.frames[t]);
    }
    entries.push_back({{"dir", video.id},
                       {"label", video.fake ? "fake" : "real"},
                       {"frames", video.frames.size()}});
  }

  fs::path mpath = fs::path(out_dir) / "manifest.json";
  std::ofstream out(mpath);
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + mpath.string());
  return mpath.string();
}

Dataset ingest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in)
    throw std::runtime_error("cannot open manifest: " + manifest_path);
  nlohmann::json manifest = nlohmann::json::parse(in);

  std::vector<std::string> problems;
  const fs::path root = fs::path(manifest_path).parent_path();
  const auto rows = manifest.value("frame_rows", std::size_t{0});
  const auto cols = manifest.value("frame_cols", std::size_t{0});
  if (rows == 0 || cols == 0)
    problems.push_back("manifest missing frame_rows/frame_cols");
  if (!manifest.contains("videos") || !manifest["videos"].is_array())
    problems.push_back("manifest missing videos array");

  Dataset out;
  if (manifest.contains("videos") && manifest["videos"].is_array()) {
    for (const auto& e : manifest["videos"]) {
      Video video;
      video.id = e.value("dir", "");
      const std::string label = e.value("label", "");
      if (label == "fake")
        video.fake = true;
      else if (label != "real") {
        problems.push_back(video.id + ": bad label '" + label + "'");
        continue;
      }
      const auto frames = e.value("frames", std::size_t{0});
      if (frames == 0) {
        problems.push_back(video.id + ": zero frames declared");
        continue;
      }
      for (std::size_t t = 0; t < frames; ++t) {
        std::ostringstream name;
        name << "frame_" << std::setw(4) << std::setfill('0') << t << ".pgm";
        fs::path p = root / video.id / name.str();
        try {
          RealGrid frame = read_pgm(p.string());
          if (frame.rows() != rows || frame.cols() != cols) {
            std::ostringstream msg;
            msg << p.string() << ": shape " << frame.rows() << "x"
                << frame.cols() << ", expected " << rows << "x" << cols;
            problems.push_back(msg.str());
          } else {
            video.frames.push_back(std::move(frame));
          }
        } catch (const std::exception& ex) {
          problems.push_back(ex.what());
        }
      }
      if (video.frames.size() == frames) out.push_back(std::move(video));
    }
  }

  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "ingest found " << problems.size() << " problem(s):";
    for (const auto& p : problems) msg << "\n  - " << p;
    throw std::runtime_error(msg.str());
  }
  return out;
}

}  // namespace muxdet
