#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "coopsteer/errors.hpp"

namespace coopsteer {

using shape_t = std::vector<std::size_t>;

inline std::size_t numel(const shape_t& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string shape_str(const shape_t& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major n-d array. `grad` stays empty until a backward pass
// populates it; when present it always matches `values` in length.
template <typename T>
struct tensor {
  shape_t shape;
  std::vector<T> values;
  std::vector<T> grad;
  bool requires_grad = false;

  tensor() = default;

  explicit tensor(shape_t s, T fill = T(0)) : shape(std::move(s)), values(numel(shape), fill) {
    for (auto d : shape)
      if (d == 0) throw config_error("tensor: zero dimension in shape " + shape_str(shape));
  }

  static tensor from(shape_t s, std::vector<T> vals) {
    tensor t;
    t.shape = std::move(s);
    t.values = std::move(vals);
    if (numel(t.shape) != t.values.size())
      throw config_error("tensor: shape " + shape_str(t.shape) + " does not hold " +
                         std::to_string(t.values.size()) + " values");
    return t;
  }

  static tensor scalar(T v) { return from({1}, {v}); }

  std::size_t size() const { return values.size(); }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }

  tensor& mark_param() {
    requires_grad = true;
    return *this;
  }

  void zero_grad() { grad.assign(values.size(), T(0)); }

  bool all_finite() const {
    for (T v : values)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

// "Same" zero padding: the output length along one spatial axis is
// ceil(in / stride); total padding is whatever that requires, with the
// extra cell (odd totals) going to the bottom/right side.
struct axis_geometry {
  std::size_t out;
  std::size_t pad_lo;
  std::size_t pad_hi;
};

inline axis_geometry same_pad_axis(std::size_t in, std::size_t kernel, std::size_t stride) {
  if (in == 0 || kernel == 0) throw config_error("same_pad_axis: zero extent");
  if (stride == 0) throw config_error("same_pad_axis: stride must be >= 1");
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t span = (out - 1) * stride + kernel;
  const std::size_t total = span > in ? span - in : 0;
  return {out, total / 2, total - total / 2};
}

}  // namespace coopsteer
