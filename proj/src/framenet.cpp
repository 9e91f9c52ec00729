#include "muxdet/framenet.hpp"

#include <cmath>

#include "muxdet/rng.hpp"

namespace muxdet {
namespace {

Real sigmoid(Real x) { return 1.0 / (1.0 + std::exp(-x)); }
Real softplus(Real x) { return (x > 30.0) ? x : std::log1p(std::exp(x)); }

}  // namespace

std::size_t FrameNet::parameter_count() const {
  std::size_t n = head_w.size() + 1;
  for (const ConvLayer& l : blocks) n += l.w.size() + l.b.size();
  return n;
}

FrameNet init_framenet(const std::vector<std::size_t>& channels,
                       std::size_t frame_rows, std::size_t frame_cols,
                       std::uint64_t seed) {
  FrameNet net;
  net.frame_rows = frame_rows;
  net.frame_cols = frame_cols;
  Rng rng(Rng::mix(seed, 0xF4A3E));
  std::size_t in_ch = 1;
  for (std::size_t ch : channels) {
    ConvLayer l;
    l.in_ch = in_ch;
    l.out_ch = ch;
    l.k = 3;
    l.stride = 2;
    l.pad = 1;
    l.w.assign(l.out_ch * l.in_ch * 9, 0.0);
    l.b.assign(l.out_ch, 0.0);
    const Real bound = std::sqrt(1.0 / static_cast<Real>(l.in_ch * 9));
    for (Real& w : l.w) w = rng.uniform(-bound, bound);
    net.blocks.push_back(std::move(l));
    in_ch = ch;
  }
  net.head_w.assign(in_ch, 0.0);
  const Real bound = std::sqrt(1.0 / static_cast<Real>(in_ch));
  for (Real& w : net.head_w) w = rng.uniform(-bound, bound);
  net.head_b = 0.0;
  return net;
}

Real framenet_forward(const FrameNet& net, const RealGrid& frame,
                      FrameNetCache* cache) {
  FeatureMaps cur = {frame};
  std::vector<FeatureMaps> acts;
  for (const ConvLayer& l : net.blocks) {
    FeatureMaps pre = conv_forward(l, cur);
    for (RealGrid& g : pre)
      for (Real& v : g) v = std::tanh(v);
    acts.push_back(pre);
    cur = acts.back();
  }
  std::vector<Real> pooled(cur.size());
  Real logit = net.head_b;
  for (std::size_t ch = 0; ch < cur.size(); ++ch) {
    Real s = 0.0;
    for (Real v : cur[ch]) s += v;
    pooled[ch] = s / static_cast<Real>(cur[ch].size());
    logit += net.head_w[ch] * pooled[ch];
  }
  if (cache) {
    cache->input = {frame};
    cache->acts = std::move(acts);
    cache->pooled = std::move(pooled);
  }
  return logit;
}

FrameNetGrads make_grads(const FrameNet& net) {
  FrameNetGrads g;
  for (const ConvLayer& l : net.blocks) {
    g.conv_w.emplace_back(l.w.size(), 0.0);
    g.conv_b.emplace_back(l.b.size(), 0.0);
  }
  g.head_w.assign(net.head_w.size(), 0.0);
  return g;
}

void framenet_backward(const FrameNet& net, const FrameNetCache& cache,
                       Real d_logit, FrameNetGrads* grads,
                       RealGrid* d_input) {
  const FeatureMaps& top = cache.acts.back();
  const std::size_t C = top.size();
  FeatureMaps d(C);
  for (std::size_t ch = 0; ch < C; ++ch) {
    if (grads) {
      grads->head_w[ch] += d_logit * cache.pooled[ch];
    }
    const Real per_px = d_logit * net.head_w[ch] /
                        static_cast<Real>(top[ch].size());
    d[ch] = RealGrid(top[ch].rows(), top[ch].cols(), per_px);
  }
  if (grads) grads->head_b += d_logit;

  // Scratch for frozen backward calls so conv_backward has a sink.
  std::vector<Real> dummy_w, dummy_b;
  for (std::size_t li = net.blocks.size(); li-- > 0;) {
    const FeatureMaps& act = cache.acts[li];
    for (std::size_t ch = 0; ch < act.size(); ++ch)
      for (std::size_t i = 0; i < act[ch].size(); ++i) {
        const Real y = act[ch].data()[i];
        d[ch].data()[i] *= (1.0 - y * y);
      }
    const FeatureMaps& in = (li == 0) ? cache.input : cache.acts[li - 1];
    if (grads) {
      d = conv_backward(net.blocks[li], in, d, grads->conv_w[li],
                        grads->conv_b[li]);
    } else {
      dummy_w.assign(net.blocks[li].w.size(), 0.0);
      dummy_b.assign(net.blocks[li].b.size(), 0.0);
      d = conv_backward(net.blocks[li], in, d, dummy_w, dummy_b);
    }
  }
  if (d_input) *d_input = std::move(d[0]);
}

void train_framenet(FrameNet& net, const Dataset& dataset, std::size_t epochs,
                    Real learning_rate, std::uint64_t seed) {
  // Per-frame samples; plain Adam without decay.
  struct Slot {
    std::vector<Real> m, v;
  };
  std::vector<std::vector<Real>*> params;
  for (ConvLayer& l : net.blocks) {
    params.push_back(&l.w);
    params.push_back(&l.b);
  }
  params.push_back(&net.head_w);
  std::vector<Slot> state(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    state[i].m.assign(params[i]->size(), 0.0);
    state[i].v.assign(params[i]->size(), 0.0);
  }
  Real mb = 0.0, vb = 0.0;  // head bias moments
  std::size_t t = 0;

  std::vector<std::pair<std::size_t, std::size_t>> samples;  // (video, frame)
  for (std::size_t vi = 0; vi < dataset.size(); ++vi)
    for (std::size_t fi = 0; fi < dataset[vi].frames.size(); ++fi)
      samples.emplace_back(vi, fi);

  Rng rng(Rng::mix(seed, 0xF17));
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = samples.size(); i-- > 1;)
      std::swap(samples[i], samples[rng.below(i + 1)]);
    for (const auto& [vi, fi] : samples) {
      FrameNetCache cache;
      const Real logit =
          framenet_forward(net, dataset[vi].frames[fi], &cache);
      const Real y = dataset[vi].fake ? 1.0 : 0.0;
      const Real d_logit = sigmoid(logit) - y;
      FrameNetGrads g = make_grads(net);
      framenet_backward(net, cache, d_logit, &g);

      std::vector<std::vector<Real>*> gs;
      for (std::size_t li = 0; li < net.blocks.size(); ++li) {
        gs.push_back(&g.conv_w[li]);
        gs.push_back(&g.conv_b[li]);
      }
      gs.push_back(&g.head_w);
      ++t;
      const Real bc1 = 1.0 - std::pow(0.9, static_cast<Real>(t));
      const Real bc2 = 1.0 - std::pow(0.999, static_cast<Real>(t));
      for (std::size_t s = 0; s < params.size(); ++s)
        for (std::size_t j = 0; j < params[s]->size(); ++j) {
          Real& m = state[s].m[j];
          Real& v = state[s].v[j];
          const Real gr = (*gs[s])[j];
          m = 0.9 * m + 0.1 * gr;
          v = 0.999 * v + 0.001 * gr * gr;
          (*params[s])[j] -=
              learning_rate * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
        }
      mb = 0.9 * mb + 0.1 * g.head_b;
      vb = 0.999 * vb + 0.001 * g.head_b * g.head_b;
      net.head_b -= learning_rate * (mb / bc1) / (std::sqrt(vb / bc2) + 1e-8);
    }
  }
}

Real framenet_bce(const FrameNet& net, const Dataset& dataset,
                  const RealGrid* delta) {
  Real loss = 0.0;
  std::size_t count = 0;
  for (const Video& v : dataset)
    for (const RealGrid& frame : v.frames) {
      RealGrid x = frame;
      if (delta)
        for (std::size_t i = 0; i < x.size(); ++i)
          x.data()[i] += delta->data()[i];
      const Real logit = framenet_forward(net, x);
      const Real t = v.fake ? 1.0 : 0.0;
      loss += t * softplus(-logit) + (1.0 - t) * softplus(logit);
      ++count;
    }
  return count ? loss / static_cast<Real>(count) : 0.0;
}

Real framenet_video_score(const FrameNet& net,
                          const std::vector<RealGrid>& frames) {
  Real s = 0.0;
  for (const RealGrid& f : frames) s += framenet_forward(net, f);
  return frames.empty() ? 0.0 : s / static_cast<Real>(frames.size());
}

}  // namespace muxdet
