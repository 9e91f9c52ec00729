#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace muxdet {

using Real = double;
using Complex = std::complex<double>;

// Dense row-major 2D grid. The workhorse container for fields, phase maps,
// frames and feature maps.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  T& at(std::size_t r, std::size_t c) {
    if (r >= rows_ || c >= cols_) throw std::out_of_range("Grid::at");
    return (*this)(r, c);
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool same_shape(const Grid& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<Real>;
using ComplexGrid = Grid<Complex>;

inline Real total_energy(const ComplexGrid& g) {
  Real e = 0.0;
  for (const Complex& z : g) e += std::norm(z);
  return e;
}

inline Real sum(const RealGrid& g) {
  Real s = 0.0;
  for (Real v : g) s += v;
  return s;
}

}  // namespace muxdet
