// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xrmbt::ad {

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

/// Dense row-major tensor. Mostly used as a 2D matrix [rows, cols].
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != count(shape))
      throw std::invalid_argument("tensor data length does not match shape " + shape_str(shape));
  }

  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int e : s) {
      if (e < 0) throw std::invalid_argument("negative extent in shape " + shape_str(s));
      n *= e;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) {
    Tensor t;
    t.data.assign(static_cast<size_t>(count(s)), T(0));
    t.shape = std::move(s);
    return t;
  }
  static Tensor full(std::vector<int> s, T v) {
    Tensor t;
    t.data.assign(static_cast<size_t>(count(s)), v);
    t.shape = std::move(s);
    return t;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  bool is_2d() const { return shape.size() == 2; }
  int rows() const { return shape.size() == 2 ? shape[0] : (shape.size() == 1 ? shape[0] : 1); }
  int cols() const { return shape.size() == 2 ? shape[1] : 1; }

  T& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

/// Glorot-uniform fill in +-sqrt(6/(fan_in+fan_out)).
template <typename T>
void glorot_fill(Tensor<T>& t, int fan_in, int fan_out, std::mt19937& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (T& v : t.data) v = static_cast<T>(dist(rng));
}

}  // namespace xrmbt::ad
