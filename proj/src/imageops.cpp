#include "muxdet/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace muxdet {

RealGrid gaussian_blur(const RealGrid& img, Real sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<Real> kernel(2 * radius + 1);
  Real ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
    ksum += kernel[i + radius];
  }
  for (Real& k : kernel) k /= ksum;

  const long R = static_cast<long>(img.rows()), C = static_cast<long>(img.cols());
  auto clampi = [](long v, long hi) { return std::clamp(v, 0L, hi - 1); };
  RealGrid tmp(img.rows(), img.cols());
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c) {
      Real s = 0.0;
      for (int i = -radius; i <= radius; ++i)
        s += kernel[i + radius] * img(r, clampi(c + i, C));
      tmp(r, c) = s;
    }
  RealGrid out(img.rows(), img.cols());
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c) {
      Real s = 0.0;
      for (int i = -radius; i <= radius; ++i)
        s += kernel[i + radius] * tmp(clampi(r + i, R), c);
      out(r, c) = s;
    }
  return out;
}

Real mean(const RealGrid& g) {
  return sum(g) / static_cast<Real>(g.size());
}

RealGrid standardize(const RealGrid& frame) {
  const Real m = mean(frame);
  Real var = 0.0;
  for (Real v : frame) var += (v - m) * (v - m);
  var /= static_cast<Real>(frame.size());
  RealGrid out(frame.rows(), frame.cols());
  if (var <= 0.0) return out;  // constant frame -> all-zero
  const Real inv_std = 1.0 / std::sqrt(var);
  for (std::size_t r = 0; r < frame.rows(); ++r)
    for (std::size_t c = 0; c < frame.cols(); ++c)
      out(r, c) = (frame(r, c) - m) * inv_std;
  return out;
}

}  // namespace muxdet
