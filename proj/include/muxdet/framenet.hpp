#pragma once

#include <cstdint>
#include <vector>

#include "muxdet/encoder.hpp"
#include "muxdet/trainer.hpp"

namespace muxdet {

// Compact per-frame convolutional classifier: conv blocks (3x3, stride 2,
// tanh) + global average pooling + affine head to one logit. Serves as the
// attack surrogate and as the deep-digital decoder baseline.
struct FrameNet {
  std::size_t frame_rows = 0, frame_cols = 0;
  std::vector<ConvLayer> blocks;
  std::vector<Real> head_w;  // [C_last]
  Real head_b = 0.0;

  std::size_t parameter_count() const;
};

FrameNet init_framenet(const std::vector<std::size_t>& channels,
                       std::size_t frame_rows, std::size_t frame_cols,
                       std::uint64_t seed);

struct FrameNetCache {
  FeatureMaps input;
  std::vector<FeatureMaps> acts;
  std::vector<Real> pooled;
};

Real framenet_forward(const FrameNet& net, const RealGrid& frame,
                      FrameNetCache* cache = nullptr);

struct FrameNetGrads {
  std::vector<std::vector<Real>> conv_w, conv_b;
  std::vector<Real> head_w;
  Real head_b = 0.0;
};

FrameNetGrads make_grads(const FrameNet& net);

// Accumulates weight gradients; optionally returns d_loss/d_frame (PGD).
void framenet_backward(const FrameNet& net, const FrameNetCache& cache,
                       Real d_logit, FrameNetGrads* grads,
                       RealGrid* d_input = nullptr);

// BCE on sigmoid(logit), Adam, per-frame samples drawn from the videos.
void train_framenet(FrameNet& net, const Dataset& dataset,
                    std::size_t epochs, Real learning_rate,
                    std::uint64_t seed);

// Mean BCE of the net over every frame of the dataset, with an optional
// additive perturbation (clamped off: raw x + delta, as during PGD).
Real framenet_bce(const FrameNet& net, const Dataset& dataset,
                  const RealGrid* delta = nullptr);

// Video-level score: mean logit over layout.N sampled frames.
Real framenet_video_score(const FrameNet& net,
                          const std::vector<RealGrid>& frames);

}  // namespace muxdet
