#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "muxdet/encoder.hpp"
#include "muxdet/rng.hpp"

using namespace muxdet;

namespace {

EncoderArch tiny_arch() {
  EncoderArch a;
  a.tile_rows = a.tile_cols = 8;
  a.channels = {3, 4};
  return a;
}

RealGrid random_frame(std::size_t n, std::uint64_t seed) {
  RealGrid f(n, n);
  Rng rng(seed);
  for (auto& v : f) v = rng.normal();
  return f;
}

}  // namespace

TEST_CASE("conv_forward matches a hand-computed 3x3 case") {
  ConvLayer layer;
  layer.in_ch = 1;
  layer.out_ch = 1;
  layer.k = 3;
  layer.stride = 1;
  layer.pad = 1;
  layer.w.assign(9, 0.0);
  layer.b.assign(1, 0.5);
  layer.weight(0, 0, 1, 1) = 2.0;  // center tap
  layer.weight(0, 0, 0, 1) = 1.0;  // tap above
  FeatureMaps in{RealGrid(2, 2)};
  in[0](0, 0) = 1.0;
  in[0](0, 1) = 2.0;
  in[0](1, 0) = 3.0;
  in[0](1, 1) = 4.0;
  FeatureMaps out = conv_forward(layer, in);
  // out(r,c) = 2*in(r,c) + in(r-1,c) + 0.5, zero-padded above.
  CHECK(out[0](0, 0) == doctest::Approx(2.5));
  CHECK(out[0](0, 1) == doctest::Approx(4.5));
  CHECK(out[0](1, 0) == doctest::Approx(7.5));
  CHECK(out[0](1, 1) == doctest::Approx(10.5));
}

TEST_CASE("conv stride-2 output shape") {
  ConvLayer layer;
  layer.in_ch = 1;
  layer.out_ch = 2;
  layer.k = 3;
  layer.stride = 2;
  layer.pad = 1;
  layer.w.assign(2 * 9, 0.1);
  layer.b.assign(2, 0.0);
  CHECK(layer.out_rows(9) == 5);
  FeatureMaps out = conv_forward(layer, {random_frame(9, 1)});
  CHECK(out.size() == 2);
  CHECK(out[0].rows() == 5);
}

TEST_CASE("all-zero parameters emit a constant pi tile") {
  EncoderParams p = init_encoder(tiny_arch(), 16, 16, 5);
  for (auto* t : param_tensors(p)) std::fill(t->begin(), t->end(), 0.0);
  RealGrid tile = encode_frame(random_frame(16, 2), p);
  REQUIRE(tile.rows() == 8);
  REQUIRE(tile.cols() == 8);
  for (Real v : tile) CHECK(v == doctest::Approx(std::numbers::pi));
}

TEST_CASE("phase tiles live in (0, 2pi)") {
  EncoderParams p = init_encoder(tiny_arch(), 16, 16, 6);
  for (std::uint64_t s = 0; s < 8; ++s) {
    RealGrid tile = encode_frame(random_frame(16, 30 + s), p);
    for (Real v : tile) {
      CHECK(v > 0.0);
      CHECK(v < 2.0 * std::numbers::pi);
    }
  }
}

TEST_CASE("backward gradients match central finite differences") {
  EncoderParams p = init_encoder(tiny_arch(), 12, 12, 7);
  RealGrid frame = random_frame(12, 8);
  // Scalar objective: fixed random weighting of the output tile.
  RealGrid w = random_frame(8, 9);
  auto loss = [&](const EncoderParams& q) {
    RealGrid tile = encode_frame(frame, q);
    Real s = 0.0;
    for (std::size_t k = 0; k < tile.size(); ++k)
      s += w.data()[k] * tile.data()[k];
    return s;
  };

  EncodeCache cache;
  RealGrid tile = encode_frame(frame, p, &cache);
  (void)tile;
  EncoderGrads grads = make_grads(p);
  RealGrid d_tile = w;
  encode_frame_backward(d_tile, p, cache, grads);

  auto tensors = param_tensors(p);
  auto gtensors = grad_tensors(grads);
  REQUIRE(tensors.size() == gtensors.size());
  Rng pick(10);
  const Real h = 1e-6;
  Real max_rel = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (int probe = 0; probe < 3; ++probe) {
      const std::size_t idx = pick.below(tensors[t]->size());
      const Real saved = (*tensors[t])[idx];
      (*tensors[t])[idx] = saved + h;
      const Real lp = loss(p);
      (*tensors[t])[idx] = saved - h;
      const Real lm = loss(p);
      (*tensors[t])[idx] = saved;
      const Real fd = (lp - lm) / (2.0 * h);
      const Real an = (*gtensors[t])[idx];
      const Real rel =
          std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      max_rel = std::max(max_rel, rel);
    }
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("frame sampling: without replacement, sorted, deterministic") {
  auto a = sample_indices(20, 6, 42);
  auto b = sample_indices(20, 6, 42);
  CHECK(a == b);
  CHECK(a.size() == 6);
  CHECK(std::is_sorted(a.begin(), a.end()));
  std::set<std::size_t> uniq(a.begin(), a.end());
  CHECK(uniq.size() == 6);  // no repeats when enough frames exist
  for (auto i : a) CHECK(i < 20);
  CHECK(a != sample_indices(20, 6, 43));
}

TEST_CASE("frame sampling: with replacement when frames are scarce") {
  auto idx = sample_indices(3, 8, 1);
  CHECK(idx.size() == 8);
  for (auto i : idx) CHECK(i < 3);
}

TEST_CASE("frame sampling covers all indices across seeds") {
  std::set<std::size_t> seen;
  for (std::uint64_t s = 0; s < 200; ++s)
    for (auto i : sample_indices(10, 4, s)) seen.insert(i);
  CHECK(seen.size() == 10);
}

TEST_CASE("frame sampling is approximately uniform") {
  // Chi-square over index frequencies; 10 categories, 4000 draws.
  std::vector<std::size_t> counts(10, 0);
  const std::size_t trials = 1000;
  for (std::uint64_t s = 0; s < trials; ++s)
    for (auto i : sample_indices(10, 4, Rng::mix(99, s))) ++counts[i];
  const Real expected = Real(trials * 4) / 10.0;
  Real chi2 = 0.0;
  for (auto c : counts) {
    const Real d = Real(c) - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 33.7);  // chi^2_{9, 0.9999}
}

TEST_CASE("flops tally matches a first-principles hand count") {
  EncoderArch a;
  a.tile_rows = a.tile_cols = 4;
  a.channels = {2};
  EncoderParams p = init_encoder(a, 8, 8, 3);
  // Convention: conv output scalar = 2*in*k^2 MACs + 1 bias + 4 activation;
  // fusion = 4/px/channel; head output = 2*in + 1 bias + 4 sigmoid +
  // 1 range scale; FFT = 5*R*C*log2(R*C); log-magnitude = 6/px.
  const std::uint64_t conv = 16ull * 2 * (2 * 9 + 1 + 4);  // per branch
  const std::uint64_t fft = 5ull * 64 * 6;
  const std::uint64_t logmag = 6ull * 64;
  const std::uint64_t gate = 16ull * 2 * (2 * 4 + 1 + 4);
  const std::uint64_t fuse = 4ull * 2 * 16;
  const std::uint64_t head = 16ull * (2 * 32 + 1 + 5);
  const std::uint64_t expected = 2 * conv + fft + logmag + gate + fuse + head;
  CHECK(flops_encode_frame(p) == expected);
}
