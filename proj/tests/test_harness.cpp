#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "muxdet/config.hpp"
#include "muxdet/dataset_io.hpp"
#include "muxdet/harness.hpp"
#include "muxdet/rng.hpp"

using namespace muxdet;

namespace {

std::vector<RealGrid> test_frames(std::size_t count, std::size_t n,
                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RealGrid> out;
  for (std::size_t i = 0; i < count; ++i) {
    RealGrid f(n, n);
    for (auto& v : f) v = rng.uniform();
    out.push_back(std::move(f));
  }
  return out;
}

Dataset toy_dataset(std::size_t videos, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.videos = videos;
  cfg.frames_per_video = 6;
  cfg.frame_rows = cfg.frame_cols = 16;
  cfg.seed = seed;
  return make_synthetic_dataset(cfg);
}

}  // namespace

TEST_CASE("zero-magnitude perturbations are the identity") {
  auto frames = test_frames(2, 16, 1);
  Perturbation noise{PerturbKind::gaussian_noise, 0.0, 3};
  Perturbation blur{PerturbKind::gaussian_blur, 0.0, 0};
  for (const auto& p : {noise, blur}) {
    auto out = perturb(frames, p);
    REQUIRE(out.size() == frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
      for (std::size_t k = 0; k < frames[i].size(); ++k)
        CHECK(out[i].data()[k] == frames[i].data()[k]);
  }
}

TEST_CASE("noise statistics match the requested sigma") {
  auto frames = test_frames(1, 256, 2);
  // Mid-gray input so clamping is inactive.
  for (auto& v : frames[0]) v = 0.5;
  Perturbation p{PerturbKind::gaussian_noise, 0.05, 7};
  auto out = perturb(frames, p);
  Real sum = 0.0, ss = 0.0;
  const std::size_t n = out[0].size();
  for (std::size_t k = 0; k < n; ++k) {
    const Real d = out[0].data()[k] - 0.5;
    sum += d;
    ss += d * d;
  }
  const Real std_measured = std::sqrt(ss / Real(n) - (sum / n) * (sum / n));
  CHECK(std::abs(std_measured - 0.05) / 0.05 < 0.05);
  // Output stays in the canonical range.
  for (Real v : out[0]) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // Same seed, same noise.
  auto again = perturb(frames, p);
  CHECK(again[0].data()[0] == out[0].data()[0]);
}

TEST_CASE("blur preserves the mean and reduces variance") {
  auto frames = test_frames(1, 64, 3);
  Perturbation p{PerturbKind::gaussian_blur, 1.5, 0};
  auto out = perturb(frames, p);
  Real m_in = 0.0, m_out = 0.0, v_in = 0.0, v_out = 0.0;
  const std::size_t n = frames[0].size();
  for (std::size_t k = 0; k < n; ++k) {
    m_in += frames[0].data()[k];
    m_out += out[0].data()[k];
  }
  m_in /= Real(n);
  m_out /= Real(n);
  for (std::size_t k = 0; k < n; ++k) {
    v_in += (frames[0].data()[k] - m_in) * (frames[0].data()[k] - m_in);
    v_out += (out[0].data()[k] - m_out) * (out[0].data()[k] - m_out);
  }
  CHECK(std::abs(m_out - m_in) < 5e-3);  // edge replication is mean-friendly
  CHECK(v_out < 0.5 * v_in);
}

TEST_CASE("jpeg at quality 100 is nearly lossless") {
  auto frames = test_frames(1, 32, 4);
  RealGrid out = jpeg_roundtrip(frames[0], 100);
  Real max_diff = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k)
    max_diff =
        std::max(max_diff, std::abs(out.data()[k] - frames[0].data()[k]));
  CHECK(max_diff <= 2.0 / 255.0);
}

TEST_CASE("jpeg quality ladder degrades monotonically in error") {
  auto frames = test_frames(1, 48, 5);
  auto mse = [&](int q) {
    RealGrid out = jpeg_roundtrip(frames[0], q);
    Real s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const Real d = out.data()[k] - frames[0].data()[k];
      s += d * d;
    }
    return s / Real(out.size());
  };
  CHECK(mse(90) <= mse(50));
  CHECK(mse(50) <= mse(10));
  // Non-multiple-of-8 frames are handled (edge replication).
  RealGrid odd(19, 21);
  Rng rng(6);
  for (auto& v : odd) v = rng.uniform();
  RealGrid out = jpeg_roundtrip(odd, 50);
  CHECK(out.rows() == 19);
  CHECK(out.cols() == 21);
  for (Real v : out) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("attacker subsets are balanced, sized and deterministic") {
  Dataset data = toy_dataset(20, 7);
  Dataset sub = attacker_subset(data, 0.2, 99);
  CHECK(sub.size() == 4);
  std::size_t fakes = 0;
  for (const auto& v : sub) fakes += v.fake ? 1 : 0;
  CHECK(fakes == 2);
  Dataset again = attacker_subset(data, 0.2, 99);
  REQUIRE(again.size() == sub.size());
  for (std::size_t i = 0; i < sub.size(); ++i)
    CHECK(again[i].id == sub[i].id);
  Dataset other = attacker_subset(data, 0.2, 100);
  bool all_same = true;
  for (std::size_t i = 0; i < sub.size(); ++i)
    all_same = all_same && other[i].id == sub[i].id;
  CHECK_FALSE(all_same);
}

TEST_CASE("universal perturbation: budget holds bit-exactly") {
  Dataset data = toy_dataset(8, 8);
  FrameNet surrogate = init_framenet({3, 4}, 16, 16, 10);
  train_framenet(surrogate, data, 2, 1e-3, 11);
  AttackSpec spec;
  spec.epsilon = 8.0 / 255.0;
  spec.epochs = 3;
  spec.seed = 12;
  RealGrid delta = attack_train(spec, surrogate, data);
  REQUIRE(delta.rows() == 16);
  for (Real v : delta) CHECK(std::abs(v) <= spec.epsilon);  // no tolerance
  // Most entries should sit on the boundary after signed-gradient steps.
  std::size_t active = 0;
  for (Real v : delta)
    if (v != 0.0) ++active;
  CHECK(active > delta.size() / 2);
  // Epsilon 0 degenerates to an all-zero perturbation.
  AttackSpec zero = spec;
  zero.epsilon = 0.0;
  RealGrid dz = attack_train(zero, surrogate, data);
  for (Real v : dz) CHECK(v == 0.0);
  // The perturbation raises the surrogate's loss.
  CHECK(framenet_bce(surrogate, data, &delta) >=
        framenet_bce(surrogate, data));
}

TEST_CASE("default step size is epsilon/4 and draws are deterministic") {
  Dataset data = toy_dataset(4, 9);
  FrameNet surrogate = init_framenet({3}, 16, 16, 13);
  AttackSpec spec;
  spec.epsilon = 4.0 / 255.0;
  spec.epochs = 1;
  spec.seed = 14;
  RealGrid a = attack_train(spec, surrogate, data);
  RealGrid b = attack_train(spec, surrogate, data);
  for (std::size_t k = 0; k < a.size(); ++k)
    CHECK(a.data()[k] == b.data()[k]);
  AttackSpec explicit_alpha = spec;
  explicit_alpha.step_size = spec.epsilon / 4.0;
  RealGrid c = attack_train(explicit_alpha, surrogate, data);
  for (std::size_t k = 0; k < a.size(); ++k)
    CHECK(a.data()[k] == c.data()[k]);
}

TEST_CASE("energy report reproduces the analytic reference numbers") {
  EnergyModel em;  // defaults are the reference operating point
  MuxLayout layout;
  layout.validate();
  DiffractiveStack stack = make_stack(0, layout, {80000.0}, 1);
  EnergyReport rep = energy_report(em, layout, stack);
  CHECK(rep.encoder_mj_per_video == doctest::Approx(178.2).epsilon(1e-3));
  CHECK(rep.decoder_batch_mj_low == doctest::Approx(20.72).epsilon(1e-3));
  CHECK(rep.decoder_batch_mj_high == doctest::Approx(61.67).epsilon(1e-3));
  CHECK(rep.decoder_video_mj_low == doctest::Approx(1.381).epsilon(1e-3));
  CHECK(rep.decoder_video_mj_high == doctest::Approx(4.111).epsilon(1e-3));
  EnergyModel e18 = em;
  e18.L = 18;
  EnergyReport rep18 = energy_report(e18, layout, stack);
  CHECK(rep18.decoder_video_mj_low == doctest::Approx(1.151).epsilon(1e-3));
  CHECK(rep18.decoder_video_mj_high == doctest::Approx(3.426).epsilon(1e-3));

  EnergyModel bad;
  bad.frame_rate_low_hz = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("framenet gradient sanity via finite differences") {
  FrameNet net = init_framenet({3, 4}, 12, 12, 15);
  Rng rng(16);
  RealGrid frame(12, 12);
  for (auto& v : frame) v = rng.uniform();
  FrameNetCache cache;
  Real logit = framenet_forward(net, frame, &cache);
  (void)logit;
  FrameNetGrads grads = make_grads(net);
  RealGrid d_input(12, 12);
  framenet_backward(net, cache, 1.0, &grads, &d_input);
  const Real h = 1e-6;
  Real max_rel = 0.0;
  for (int probe = 0; probe < 6; ++probe) {
    const std::size_t r = rng.below(12), c = rng.below(12);
    RealGrid fp = frame, fm = frame;
    fp(r, c) += h;
    fm(r, c) -= h;
    const Real fd =
        (framenet_forward(net, fp) - framenet_forward(net, fm)) / (2.0 * h);
    const Real an = d_input(r, c);
    max_rel = std::max(max_rel, std::abs(an - fd) /
                                    std::max({std::abs(an), std::abs(fd),
                                              Real(1e-6)}));
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("degradation sweep at zero magnitude equals the clean run") {
  MuxLayout m;
  m.L = 4;
  m.N = 4;
  m.interp_factor = 1;
  m.video_grid = {2, 2};
  m.frame_grid = {2, 2};
  m.tile_rows = m.tile_cols = 16;
  m.slm_rows = m.slm_cols = 64;
  m.sensor_rows = m.sensor_cols = 64;
  m.propagation_distance_um = 10000.0;
  m.det_rows = m.det_cols = 6;
  m.det_gap = 3;
  m.validate();
  Dataset data = toy_dataset(4, 21);
  HybridModel model;
  EncoderArch arch;
  arch.tile_rows = arch.tile_cols = 16;
  arch.channels = {3};
  model.encoder = init_encoder(arch, 16, 16, 22);
  model.stack = make_stack(0, m, {m.propagation_distance_um}, 23);
  auto rows = degradation_sweep(model, data, m, PerturbKind::gaussian_blur,
                                {0.0, 1.0}, 24);
  REQUIRE(rows.size() == 2);
  EvalResult clean = evaluate(model, data, m, 24);
  ChannelReport ref = channel_report(clean.scores, clean.labels);
  CHECK(rows[0].report.accuracy.mean == doctest::Approx(ref.accuracy.mean));
  CHECK(rows[0].report.ks.mean == doctest::Approx(ref.ks.mean));
}
