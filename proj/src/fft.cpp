#include "muxdet/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace muxdet {
namespace {

std::mutex g_plan_mutex;

fftw_plan plan_for(std::size_t rows, std::size_t cols, int sign) {
  static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto key = std::make_tuple(rows, cols, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  // FFTW_UNALIGNED lets one plan serve any caller-owned buffer.
  std::vector<fftw_complex> scratch(rows * cols);
  fftw_plan p = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols),
                                 scratch.data(), scratch.data(), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

void execute(ComplexGrid& g, int sign) {
  if (g.size() == 0) return;
  fftw_plan p = plan_for(g.rows(), g.cols(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(g.data());
  fftw_execute_dft(p, buf, buf);
}

template <typename T>
void roll_half(Grid<T>& g) {
  const std::size_t R = g.rows(), C = g.cols();
  Grid<T> out(R, C);
  const std::size_t r2 = R / 2, c2 = C / 2;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      out((r + r2) % R, (c + c2) % C) = g(r, c);
  g = std::move(out);
}

}  // namespace

void fft2(ComplexGrid& g) { execute(g, FFTW_FORWARD); }

void ifft2(ComplexGrid& g) {
  execute(g, FFTW_BACKWARD);
  const Real scale = 1.0 / static_cast<Real>(g.size());
  for (Complex& z : g) z *= scale;
}

void fftshift(ComplexGrid& g) { roll_half(g); }
void fftshift(RealGrid& g) { roll_half(g); }

}  // namespace muxdet
