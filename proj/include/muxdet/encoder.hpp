#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "muxdet/grid.hpp"
#include "muxdet/muxlayout.hpp"

namespace muxdet {

using FeatureMaps = std::vector<RealGrid>;  // one grid per channel

struct VideoSample {
  std::vector<RealGrid> frames;  // standardized
  bool fake = false;
  std::string source_id;
};

// 2D convolution, square kernel, zero padding.
struct ConvLayer {
  std::size_t in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
  std::vector<Real> w;  // [out][in][k][k]
  std::vector<Real> b;  // [out]

  Real& weight(std::size_t o, std::size_t i, std::size_t kr, std::size_t kc) {
    return w[((o * in_ch + i) * k + kr) * k + kc];
  }
  Real weight(std::size_t o, std::size_t i, std::size_t kr,
              std::size_t kc) const {
    return w[((o * in_ch + i) * k + kr) * k + kc];
  }
  std::size_t out_rows(std::size_t in_rows) const {
    return (in_rows + 2 * pad - k) / stride + 1;
  }
};

FeatureMaps conv_forward(const ConvLayer& layer, const FeatureMaps& in);
// d_in is returned; dW/db are accumulated into grads (same layout as w/b).
FeatureMaps conv_backward(const ConvLayer& layer, const FeatureMaps& in,
                          const FeatureMaps& d_out, std::vector<Real>& dw,
                          std::vector<Real>& db);

struct Affine {
  std::size_t in = 0, out = 0;
  std::vector<Real> w;  // [out][in]
  std::vector<Real> b;  // [out]
};

struct EncoderArch {
  std::size_t tile_rows = 64, tile_cols = 64;
  std::vector<std::size_t> channels = {8, 16, 16};  // per conv block
};

// Two-branch encoder: spatial CNN + Fourier-domain CNN on the log-magnitude
// spectrum, attention-gated fusion, affine head to a phase tile in [0, 2pi).
struct EncoderParams {
  EncoderArch arch;
  std::size_t frame_rows = 0, frame_cols = 0;
  std::vector<ConvLayer> spatial;
  std::vector<ConvLayer> fourier;
  ConvLayer gate;  // 1x1 over concatenated branch outputs
  Affine head;

  std::size_t parameter_count() const;
};

struct EncoderGrads {
  std::vector<std::vector<Real>> conv_w, conv_b;  // spatial then fourier, then gate
  std::vector<Real> head_w, head_b;
};

EncoderParams init_encoder(const EncoderArch& arch, std::size_t frame_rows,
                           std::size_t frame_cols, std::uint64_t seed);
EncoderGrads make_grads(const EncoderParams& p);

// Mutable views over every parameter tensor (same order in both).
std::vector<std::vector<Real>*> param_tensors(EncoderParams& p);
std::vector<std::vector<Real>*> grad_tensors(EncoderGrads& g);

// Intermediate activations kept for the backward pass.
struct EncodeCache {
  FeatureMaps spatial_in, fourier_in;
  std::vector<FeatureMaps> spatial_acts, fourier_acts;  // post-tanh per block
  FeatureMaps gate_out;                                 // sigmoid gates
  FeatureMaps fused;
  std::vector<Real> head_sig;  // sigmoid(head pre-activation)
};

RealGrid encode_frame(const RealGrid& frame, const EncoderParams& params,
                      EncodeCache* cache = nullptr);

// Pulls d_loss/d_tile back onto the encoder parameters.
void encode_frame_backward(const RealGrid& d_tile, const EncoderParams& params,
                           const EncodeCache& cache, EncoderGrads& grads);

// Frame selection indices: without replacement (sorted) when enough frames
// exist, with replacement otherwise. Deterministic in seed.
std::vector<std::size_t> sample_indices(std::size_t frame_count, std::size_t N,
                                        std::uint64_t seed);

VideoSample sample_frames(const std::vector<RealGrid>& video, std::size_t N,
                          std::uint64_t seed);

// All L*N frames encoded independently, then assembled into the phase seed.
PhaseMap forward_batch(const std::vector<VideoSample>& videos,
                       const EncoderParams& params, const MuxLayout& layout,
                       std::vector<EncodeCache>* caches = nullptr);

// Deterministic FLOP tally of one encode_frame forward pass
// (multiply-accumulate = 2 FLOPs; transforms per the decode convention).
std::uint64_t flops_encode_frame(const EncoderParams& params);

}  // namespace muxdet
