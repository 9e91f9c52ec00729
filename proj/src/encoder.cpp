#include "muxdet/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "muxdet/fft.hpp"
#include "muxdet/imageops.hpp"
#include "muxdet/rng.hpp"

namespace muxdet {
namespace {

constexpr Real kTwoPi = 2.0 * std::numbers::pi;

Real sigmoid(Real x) { return 1.0 / (1.0 + std::exp(-x)); }

void init_conv(ConvLayer& layer, Rng& rng) {
  layer.w.assign(layer.out_ch * layer.in_ch * layer.k * layer.k, 0.0);
  layer.b.assign(layer.out_ch, 0.0);
  const Real bound =
      std::sqrt(1.0 / static_cast<Real>(layer.in_ch * layer.k * layer.k));
  for (Real& w : layer.w) w = rng.uniform(-bound, bound);
}

FeatureMaps tanh_maps(const FeatureMaps& in) {
  FeatureMaps out;
  out.reserve(in.size());
  for (const RealGrid& g : in) {
    RealGrid o(g.rows(), g.cols());
    for (std::size_t idx = 0; idx < g.size(); ++idx)
      o.data()[idx] = std::tanh(g.data()[idx]);
    out.push_back(std::move(o));
  }
  return out;
}

// d pre-activation from d post-activation, using the cached tanh outputs.
FeatureMaps tanh_backward(const FeatureMaps& act, const FeatureMaps& d_out) {
  FeatureMaps d(act.size());
  for (std::size_t ch = 0; ch < act.size(); ++ch) {
    d[ch] = RealGrid(act[ch].rows(), act[ch].cols());
    for (std::size_t i = 0; i < act[ch].size(); ++i) {
      const Real y = act[ch].data()[i];
      d[ch].data()[i] = d_out[ch].data()[i] * (1.0 - y * y);
    }
  }
  return d;
}

RealGrid log_magnitude_spectrum(const RealGrid& frame) {
  ComplexGrid spec(frame.rows(), frame.cols());
  for (std::size_t i = 0; i < frame.size(); ++i)
    spec.data()[i] = Complex(frame.data()[i], 0.0);
  fft2(spec);
  fftshift(spec);
  RealGrid out(frame.rows(), frame.cols());
  for (std::size_t i = 0; i < frame.size(); ++i)
    out.data()[i] = std::log1p(std::abs(spec.data()[i]));
  return out;
}

struct BranchCache {
  std::vector<FeatureMaps> acts;  // post-tanh outputs per block
};

FeatureMaps branch_forward(const std::vector<ConvLayer>& layers,
                           const FeatureMaps& input,
                           std::vector<FeatureMaps>* acts) {
  FeatureMaps cur = input;
  for (const ConvLayer& layer : layers) {
    cur = tanh_maps(conv_forward(layer, cur));
    if (acts) acts->push_back(cur);
  }
  return cur;
}

void branch_backward(const std::vector<ConvLayer>& layers,
                     const FeatureMaps& input,
                     const std::vector<FeatureMaps>& acts,
                     const FeatureMaps& d_top, std::size_t grad_base,
                     EncoderGrads& grads) {
  FeatureMaps d = d_top;
  for (std::size_t li = layers.size(); li-- > 0;) {
    d = tanh_backward(acts[li], d);
    const FeatureMaps& in = (li == 0) ? input : acts[li - 1];
    d = conv_backward(layers[li], in, d, grads.conv_w[grad_base + li],
                      grads.conv_b[grad_base + li]);
  }
}

}  // namespace

FeatureMaps conv_forward(const ConvLayer& layer, const FeatureMaps& in) {
  if (in.size() != layer.in_ch)
    throw std::invalid_argument("conv_forward: channel mismatch");
  const std::size_t ir = in[0].rows(), ic = in[0].cols();
  const std::size_t orows = layer.out_rows(ir), ocols = layer.out_rows(ic);
  FeatureMaps out(layer.out_ch, RealGrid(orows, ocols));
  const long pad = static_cast<long>(layer.pad);
  for (std::size_t o = 0; o < layer.out_ch; ++o) {
    for (std::size_t r = 0; r < orows; ++r)
      for (std::size_t c = 0; c < ocols; ++c) {
        Real acc = layer.b[o];
        for (std::size_t i = 0; i < layer.in_ch; ++i)
          for (std::size_t kr = 0; kr < layer.k; ++kr) {
            const long y = static_cast<long>(r * layer.stride + kr) - pad;
            if (y < 0 || y >= static_cast<long>(ir)) continue;
            for (std::size_t kc = 0; kc < layer.k; ++kc) {
              const long x = static_cast<long>(c * layer.stride + kc) - pad;
              if (x < 0 || x >= static_cast<long>(ic)) continue;
              acc += layer.weight(o, i, kr, kc) *
                     in[i](static_cast<std::size_t>(y),
                           static_cast<std::size_t>(x));
            }
          }
        out[o](r, c) = acc;
      }
  }
  return out;
}

FeatureMaps conv_backward(const ConvLayer& layer, const FeatureMaps& in,
                          const FeatureMaps& d_out, std::vector<Real>& dw,
                          std::vector<Real>& db) {
  const std::size_t ir = in[0].rows(), ic = in[0].cols();
  const std::size_t orows = d_out[0].rows(), ocols = d_out[0].cols();
  FeatureMaps d_in(layer.in_ch, RealGrid(ir, ic));
  const long pad = static_cast<long>(layer.pad);
  for (std::size_t o = 0; o < layer.out_ch; ++o) {
    for (std::size_t r = 0; r < orows; ++r)
      for (std::size_t c = 0; c < ocols; ++c) {
        const Real g = d_out[o](r, c);
        if (g == 0.0) continue;
        db[o] += g;
        for (std::size_t i = 0; i < layer.in_ch; ++i)
          for (std::size_t kr = 0; kr < layer.k; ++kr) {
            const long y = static_cast<long>(r * layer.stride + kr) - pad;
            if (y < 0 || y >= static_cast<long>(ir)) continue;
            for (std::size_t kc = 0; kc < layer.k; ++kc) {
              const long x = static_cast<long>(c * layer.stride + kc) - pad;
              if (x < 0 || x >= static_cast<long>(ic)) continue;
              const auto yy = static_cast<std::size_t>(y);
              const auto xx = static_cast<std::size_t>(x);
              dw[((o * layer.in_ch + i) * layer.k + kr) * layer.k + kc] +=
                  g * in[i](yy, xx);
              d_in[i](yy, xx) += g * layer.weight(o, i, kr, kc);
            }
          }
      }
  }
  return d_in;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const ConvLayer* l : {&gate})
    n += l->w.size() + l->b.size();
  for (const std::vector<ConvLayer>* br : {&spatial, &fourier})
    for (const ConvLayer& l : *br) n += l.w.size() + l.b.size();
  n += head.w.size() + head.b.size();
  return n;
}

EncoderParams init_encoder(const EncoderArch& arch, std::size_t frame_rows,
                           std::size_t frame_cols, std::uint64_t seed) {
  if (arch.channels.empty())
    throw std::invalid_argument("init_encoder: need >= 1 conv block");
  EncoderParams p;
  p.arch = arch;
  p.frame_rows = frame_rows;
  p.frame_cols = frame_cols;
  Rng rng(Rng::mix(seed, 0xE11C0DE));

  auto build_branch = [&](std::vector<ConvLayer>& branch) {
    std::size_t in_ch = 1;
    for (std::size_t ch : arch.channels) {
      ConvLayer l;
      l.in_ch = in_ch;
      l.out_ch = ch;
      l.k = 3;
      l.stride = 2;
      l.pad = 1;
      init_conv(l, rng);
      branch.push_back(std::move(l));
      in_ch = ch;
    }
  };
  build_branch(p.spatial);
  build_branch(p.fourier);

  const std::size_t c_last = arch.channels.back();
  p.gate.in_ch = 2 * c_last;
  p.gate.out_ch = c_last;
  p.gate.k = 1;
  p.gate.stride = 1;
  p.gate.pad = 0;
  init_conv(p.gate, rng);

  std::size_t h = frame_rows, w = frame_cols;
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  p.head.in = c_last * h * w;
  p.head.out = arch.tile_rows * arch.tile_cols;
  p.head.w.assign(p.head.out * p.head.in, 0.0);
  p.head.b.assign(p.head.out, 0.0);
  const Real bound = std::sqrt(1.0 / static_cast<Real>(p.head.in));
  for (Real& w_ : p.head.w) w_ = rng.uniform(-bound, bound);
  return p;
}

EncoderGrads make_grads(const EncoderParams& p) {
  EncoderGrads g;
  for (const std::vector<ConvLayer>* br : {&p.spatial, &p.fourier})
    for (const ConvLayer& l : *br) {
      g.conv_w.emplace_back(l.w.size(), 0.0);
      g.conv_b.emplace_back(l.b.size(), 0.0);
    }
  g.conv_w.emplace_back(p.gate.w.size(), 0.0);
  g.conv_b.emplace_back(p.gate.b.size(), 0.0);
  g.head_w.assign(p.head.w.size(), 0.0);
  g.head_b.assign(p.head.b.size(), 0.0);
  return g;
}

std::vector<std::vector<Real>*> param_tensors(EncoderParams& p) {
  std::vector<std::vector<Real>*> out;
  for (std::vector<ConvLayer>* br : {&p.spatial, &p.fourier})
    for (ConvLayer& l : *br) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
  out.push_back(&p.gate.w);
  out.push_back(&p.gate.b);
  out.push_back(&p.head.w);
  out.push_back(&p.head.b);
  return out;
}

std::vector<std::vector<Real>*> grad_tensors(EncoderGrads& g) {
  std::vector<std::vector<Real>*> out;
  for (std::size_t i = 0; i < g.conv_w.size(); ++i) {
    out.push_back(&g.conv_w[i]);
    out.push_back(&g.conv_b[i]);
  }
  out.push_back(&g.head_w);
  out.push_back(&g.head_b);
  return out;
}

RealGrid encode_frame(const RealGrid& frame, const EncoderParams& params,
                      EncodeCache* cache) {
  if (frame.rows() != params.frame_rows || frame.cols() != params.frame_cols)
    throw std::invalid_argument("encode_frame: frame shape mismatch");

  FeatureMaps spatial_in = {frame};
  FeatureMaps fourier_in = {log_magnitude_spectrum(frame)};

  std::vector<FeatureMaps> s_acts, f_acts;
  FeatureMaps s_out = branch_forward(params.spatial, spatial_in, &s_acts);
  FeatureMaps f_out = branch_forward(params.fourier, fourier_in, &f_acts);

  FeatureMaps concat;
  concat.reserve(s_out.size() + f_out.size());
  for (const RealGrid& g : s_out) concat.push_back(g);
  for (const RealGrid& g : f_out) concat.push_back(g);
  FeatureMaps gate_pre = conv_forward(params.gate, concat);
  FeatureMaps gates(gate_pre.size());
  for (std::size_t ch = 0; ch < gate_pre.size(); ++ch) {
    gates[ch] = RealGrid(gate_pre[ch].rows(), gate_pre[ch].cols());
    for (std::size_t i = 0; i < gate_pre[ch].size(); ++i)
      gates[ch].data()[i] = sigmoid(gate_pre[ch].data()[i]);
  }

  FeatureMaps fused(s_out.size());
  for (std::size_t ch = 0; ch < s_out.size(); ++ch) {
    fused[ch] = RealGrid(s_out[ch].rows(), s_out[ch].cols());
    for (std::size_t i = 0; i < s_out[ch].size(); ++i) {
      const Real g = gates[ch].data()[i];
      fused[ch].data()[i] =
          g * s_out[ch].data()[i] + (1.0 - g) * f_out[ch].data()[i];
    }
  }

  // Flatten channel-major and apply the head.
  std::vector<Real> flat;
  flat.reserve(params.head.in);
  for (const RealGrid& g : fused)
    flat.insert(flat.end(), g.begin(), g.end());
  if (flat.size() != params.head.in)
    throw std::invalid_argument("encode_frame: head input size mismatch");

  RealGrid tile(params.arch.tile_rows, params.arch.tile_cols);
  std::vector<Real> head_sig(params.head.out);
  for (std::size_t o = 0; o < params.head.out; ++o) {
    Real acc = params.head.b[o];
    const Real* wrow = &params.head.w[o * params.head.in];
    for (std::size_t i = 0; i < params.head.in; ++i) acc += wrow[i] * flat[i];
    const Real s = sigmoid(acc);
    head_sig[o] = s;
    tile.data()[o] = kTwoPi * s;
  }

  if (cache) {
    cache->spatial_in = std::move(spatial_in);
    cache->fourier_in = std::move(fourier_in);
    cache->spatial_acts = std::move(s_acts);
    cache->fourier_acts = std::move(f_acts);
    cache->gate_out = std::move(gates);
    cache->fused = std::move(fused);
    cache->head_sig = std::move(head_sig);
  }
  return tile;
}

void encode_frame_backward(const RealGrid& d_tile, const EncoderParams& params,
                           const EncodeCache& cache, EncoderGrads& grads) {
  const std::size_t B = params.spatial.size();
  const FeatureMaps& s_out = cache.spatial_acts.back();
  const FeatureMaps& f_out = cache.fourier_acts.back();
  const std::size_t C = s_out.size();
  const std::size_t fh = s_out[0].rows(), fw = s_out[0].cols();

  // Head: tile = 2*pi*sigmoid(W*flat + b).
  std::vector<Real> d_pre(params.head.out);
  for (std::size_t o = 0; o < params.head.out; ++o) {
    const Real s = cache.head_sig[o];
    d_pre[o] = d_tile.data()[o] * kTwoPi * s * (1.0 - s);
  }
  std::vector<Real> flat;
  flat.reserve(params.head.in);
  for (const RealGrid& g : cache.fused)
    flat.insert(flat.end(), g.begin(), g.end());
  std::vector<Real> d_flat(params.head.in, 0.0);
  for (std::size_t o = 0; o < params.head.out; ++o) {
    const Real g = d_pre[o];
    grads.head_b[o] += g;
    Real* dwrow = &grads.head_w[o * params.head.in];
    const Real* wrow = &params.head.w[o * params.head.in];
    for (std::size_t i = 0; i < params.head.in; ++i) {
      dwrow[i] += g * flat[i];
      d_flat[i] += g * wrow[i];
    }
  }

  FeatureMaps d_fused(C, RealGrid(fh, fw));
  for (std::size_t ch = 0; ch < C; ++ch)
    std::copy(d_flat.begin() + static_cast<long>(ch * fh * fw),
              d_flat.begin() + static_cast<long>((ch + 1) * fh * fw),
              d_fused[ch].data());

  // fused = g*s + (1-g)*f, g = sigmoid(gate_conv(concat(s, f))).
  FeatureMaps d_s(C, RealGrid(fh, fw)), d_f(C, RealGrid(fh, fw));
  FeatureMaps d_gate_pre(C, RealGrid(fh, fw));
  for (std::size_t ch = 0; ch < C; ++ch)
    for (std::size_t i = 0; i < d_fused[ch].size(); ++i) {
      const Real g = cache.gate_out[ch].data()[i];
      const Real df = d_fused[ch].data()[i];
      d_s[ch].data()[i] = g * df;
      d_f[ch].data()[i] = (1.0 - g) * df;
      const Real dg =
          (s_out[ch].data()[i] - f_out[ch].data()[i]) * df;
      d_gate_pre[ch].data()[i] = dg * g * (1.0 - g);
    }

  FeatureMaps concat;
  concat.reserve(2 * C);
  for (const RealGrid& g : s_out) concat.push_back(g);
  for (const RealGrid& g : f_out) concat.push_back(g);
  const std::size_t gate_idx = 2 * B;  // grad slot order: spatial, fourier, gate
  FeatureMaps d_concat =
      conv_backward(params.gate, concat, d_gate_pre, grads.conv_w[gate_idx],
                    grads.conv_b[gate_idx]);
  for (std::size_t ch = 0; ch < C; ++ch)
    for (std::size_t i = 0; i < d_s[ch].size(); ++i) {
      d_s[ch].data()[i] += d_concat[ch].data()[i];
      d_f[ch].data()[i] += d_concat[C + ch].data()[i];
    }

  branch_backward(params.spatial, cache.spatial_in, cache.spatial_acts, d_s, 0,
                  grads);
  branch_backward(params.fourier, cache.fourier_in, cache.fourier_acts, d_f, B,
                  grads);
}

std::vector<std::size_t> sample_indices(std::size_t frame_count, std::size_t N,
                                        std::uint64_t seed) {
  if (frame_count == 0)
    throw std::invalid_argument("sample_indices: empty video");
  Rng rng(Rng::mix(seed, 0x5A3D1E5));
  std::vector<std::size_t> idx;
  idx.reserve(N);
  if (frame_count >= N) {
    std::vector<std::size_t> pool(frame_count);
    for (std::size_t i = 0; i < frame_count; ++i) pool[i] = i;
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t j = i + rng.below(frame_count - i);
      std::swap(pool[i], pool[j]);
      idx.push_back(pool[i]);
    }
  } else {
    for (std::size_t i = 0; i < N; ++i)
      idx.push_back(rng.below(frame_count));
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

VideoSample sample_frames(const std::vector<RealGrid>& video, std::size_t N,
                          std::uint64_t seed) {
  const std::vector<std::size_t> idx = sample_indices(video.size(), N, seed);
  VideoSample s;
  s.frames.reserve(N);
  for (std::size_t i : idx) s.frames.push_back(standardize(video[i]));
  return s;
}

PhaseMap forward_batch(const std::vector<VideoSample>& videos,
                       const EncoderParams& params, const MuxLayout& layout,
                       std::vector<EncodeCache>* caches) {
  if (videos.size() != layout.L)
    throw std::invalid_argument("forward_batch: batch size != L");
  std::vector<RealGrid> tiles;
  tiles.reserve(layout.L * layout.N);
  if (caches) caches->resize(layout.L * layout.N);
  for (std::size_t v = 0; v < layout.L; ++v) {
    if (videos[v].frames.size() != layout.N)
      throw std::invalid_argument("forward_batch: video frame count != N");
    for (std::size_t i = 0; i < layout.N; ++i)
      tiles.push_back(encode_frame(videos[v].frames[i], params,
                                   caches ? &(*caches)[v * layout.N + i]
                                          : nullptr));
  }
  return assemble_phase(tiles, layout);
}

std::uint64_t flops_encode_frame(const EncoderParams& params) {
  std::uint64_t flops = 0;
  const auto HW =
      static_cast<std::uint64_t>(params.frame_rows * params.frame_cols);
  // Fourier branch input: one transform + log-magnitude per pixel.
  flops += 5 * HW * static_cast<std::uint64_t>(std::llround(
                        std::log2(static_cast<double>(HW))));
  flops += 6 * HW;
  auto conv_flops = [](const ConvLayer& l, std::size_t h, std::size_t w) {
    const std::uint64_t out_px =
        static_cast<std::uint64_t>(l.out_rows(h)) * l.out_rows(w);
    return out_px * l.out_ch * (2 * l.in_ch * l.k * l.k + 1 + 4);
  };
  for (const std::vector<ConvLayer>* br : {&params.spatial, &params.fourier}) {
    std::size_t h = params.frame_rows, w = params.frame_cols;
    for (const ConvLayer& l : *br) {
      flops += conv_flops(l, h, w);
      h = l.out_rows(h);
      w = l.out_rows(w);
    }
  }
  std::size_t h = params.frame_rows, w = params.frame_cols;
  for (std::size_t i = 0; i < params.arch.channels.size(); ++i) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  flops += conv_flops(params.gate, h, w);
  // Gated fusion g*s + (1-g)*f: 4 flops per fused pixel per channel.
  flops += 4ull * params.gate.out_ch * h * w;
  flops += static_cast<std::uint64_t>(params.head.out) *
           (2 * params.head.in + 1 + 5);
  return flops;
}

}  // namespace muxdet
