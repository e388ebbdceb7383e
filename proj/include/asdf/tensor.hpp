#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "asdf/common.hpp"

namespace asdf {

// Dense row-major tensor of doubles. Rank is 1 or 2 everywhere in this
// project; the shape vector keeps the API honest about which one it is.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shp) {
    Tensor t;
    std::size_t n = 1;
    for (int d : shp) {
      if (d <= 0) throw ShapeError("Tensor: non-positive dimension");
      n *= static_cast<std::size_t>(d);
    }
    t.shape = std::move(shp);
    t.data.assign(n, 0.0);
    return t;
  }

  static Tensor from(std::vector<int> shp, std::vector<double> values) {
    Tensor t = zeros(std::move(shp));
    if (values.size() != t.data.size()) throw ShapeError("Tensor: data length does not match shape");
    t.data = std::move(values);
    return t;
  }

  static Tensor scalar(double v) { return from({1}, {v}); }

  static Tensor row_vector(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return from({n}, std::move(values));
  }

  std::size_t size() const { return data.size(); }
  bool is_scalar() const { return data.size() == 1; }

  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NumericsError("non-finite values in " + what);
}

}  // namespace asdf
