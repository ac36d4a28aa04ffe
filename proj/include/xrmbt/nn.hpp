// SPDX-License-Identifier: Apache-2.0
//
// Named parameter storage plus small graph composites (linear layers, row
// norms, cross products, 6D->rotation Gram-Schmidt) shared by the networks.
#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xrmbt/graph.hpp"
#include "xrmbt/tensor.hpp"

namespace xrmbt::nn {

/// Small epsilon inside sqrt when normalizing rows; keeps gradients finite at
/// zero without perturbing unit-norm inputs (1 + 1e-12 rounds back to 1 in
/// 32-bit).
inline constexpr double kNormEps = 1e-12;

template <typename T>
struct ParamStore {
  struct Entry {
    std::string name;
    ad::Tensor<T> value;
  };
  std::vector<Entry> entries;

  int add(std::string name, ad::Tensor<T> v) {
    if (find(name) >= 0) throw std::invalid_argument("duplicate parameter name: " + name);
    entries.push_back({std::move(name), std::move(v)});
    return static_cast<int>(entries.size()) - 1;
  }

  int find(std::string_view name) const {
    for (size_t i = 0; i < entries.size(); ++i)
      if (entries[i].name == name) return static_cast<int>(i);
    return -1;
  }

  ad::Tensor<T>& at(std::string_view name) {
    const int i = find(name);
    if (i < 0) throw std::out_of_range("no such parameter: " + std::string(name));
    return entries[i].value;
  }
  const ad::Tensor<T>& at(std::string_view name) const {
    const int i = find(name);
    if (i < 0) throw std::out_of_range("no such parameter: " + std::string(name));
    return entries[i].value;
  }

  size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& e : entries) n += e.value.data.size();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries) out.add(e.name, e.value.template cast<U>());
    return out;
  }
};

/// Registers W [in,out] (Glorot uniform) and b [1,out] (zeros) under
/// `prefix.w` / `prefix.b`.
template <typename T>
void add_linear(ParamStore<T>& ps, const std::string& prefix, int in, int out,
                std::mt19937& rng) {
  ad::Tensor<T> w = ad::Tensor<T>::zeros({in, out});
  ad::glorot_fill(w, in, out, rng);
  ps.add(prefix + ".w", std::move(w));
  ps.add(prefix + ".b", ad::Tensor<T>::zeros({1, out}));
}

/// Zero-initialized variant (residual heads start as the identity).
template <typename T>
void add_linear_zero(ParamStore<T>& ps, const std::string& prefix, int in, int out) {
  ps.add(prefix + ".w", ad::Tensor<T>::zeros({in, out}));
  ps.add(prefix + ".b", ad::Tensor<T>::zeros({1, out}));
}

/// Binds every entry as a param node, in store order.
template <typename T>
std::vector<ad::NodeId> bind_params(ad::Graph<T>& g, const ParamStore<T>& ps) {
  std::vector<ad::NodeId> ids;
  ids.reserve(ps.entries.size());
  for (const auto& e : ps.entries) ids.push_back(g.param(e.value));
  return ids;
}

/// Handle to a bound linear layer inside one graph.
struct LinearRef {
  ad::NodeId w = -1;
  ad::NodeId b = -1;
};

/// Finds `prefix.w` / `prefix.b` among bound nodes.
template <typename T>
LinearRef linear_ref(const ParamStore<T>& ps, const std::vector<ad::NodeId>& bound,
                     std::string_view prefix) {
  LinearRef r;
  r.w = bound[ps.find(std::string(prefix) + ".w")];
  r.b = bound[ps.find(std::string(prefix) + ".b")];
  return r;
}

template <typename T>
ad::NodeId linear(ad::Graph<T>& g, ad::NodeId x, const LinearRef& l) {
  ad::NodeId y = g.matmul(x, l.w);
  return g.add(y, g.repeat_rows(l.b, g.val(x).rows()));
}

template <typename T>
ad::NodeId linear_relu(ad::Graph<T>& g, ad::NodeId x, const LinearRef& l) {
  return g.relu(linear(g, x, l));
}

/// Per-row squared L2 norm: [r,c] -> [r,1].
template <typename T>
ad::NodeId rows_sqnorm(ad::Graph<T>& g, ad::NodeId x) {
  return g.row_sum(g.mul(x, x));
}

/// Per-row L2 norm, eps-guarded: sqrt(||x||^2 + eps).
template <typename T>
ad::NodeId rows_norm(ad::Graph<T>& g, ad::NodeId x) {
  return g.sqrt(g.shift(rows_sqnorm(g, x), static_cast<T>(kNormEps)));
}

template <typename T>
ad::NodeId normalize_rows(ad::Graph<T>& g, ad::NodeId x) {
  const int c = g.val(x).cols();
  return g.div(x, g.tile_cols(rows_norm(g, x), c));
}

/// Per-row cross product of two [r,3] tensors.
template <typename T>
ad::NodeId cross3(ad::Graph<T>& g, ad::NodeId a, ad::NodeId b) {
  ad::NodeId ax = g.slice_cols(a, 0, 1), ay = g.slice_cols(a, 1, 2), az = g.slice_cols(a, 2, 3);
  ad::NodeId bx = g.slice_cols(b, 0, 1), by = g.slice_cols(b, 1, 2), bz = g.slice_cols(b, 2, 3);
  ad::NodeId cx = g.sub(g.mul(ay, bz), g.mul(az, by));
  ad::NodeId cy = g.sub(g.mul(az, bx), g.mul(ax, bz));
  ad::NodeId cz = g.sub(g.mul(ax, by), g.mul(ay, bx));
  return g.concat_cols({cx, cy, cz});
}

/// Gram-Schmidt 6D -> rotation. Input [r,6] rows (b1x,b1y,b1z,b2x,b2y,b2z)
/// holding the first two matrix columns; output [r,9] row-major rotation
/// matrices. (1,0,0,0,1,0) maps to the exact identity.
template <typename T>
ad::NodeId gram_schmidt6(ad::Graph<T>& g, ad::NodeId x) {
  const auto& tx = g.val(x);
  if (!tx.is_2d() || tx.cols() != 6)
    throw std::invalid_argument("gram_schmidt6 expects [r,6], got " + ad::shape_str(tx.shape));
  ad::NodeId a1 = g.slice_cols(x, 0, 3);
  ad::NodeId a2 = g.slice_cols(x, 3, 6);
  ad::NodeId b1 = normalize_rows(g, a1);
  ad::NodeId d = g.row_sum(g.mul(b1, a2));
  ad::NodeId u2 = g.sub(a2, g.mul(g.tile_cols(d, 3), b1));
  ad::NodeId b2 = normalize_rows(g, u2);
  ad::NodeId b3 = cross3(g, b1, b2);
  // columns (b1,b2,b3) laid out row-major
  std::vector<ad::NodeId> cells;
  cells.reserve(9);
  for (int r = 0; r < 3; ++r) {
    cells.push_back(g.slice_cols(b1, r, r + 1));
    cells.push_back(g.slice_cols(b2, r, r + 1));
    cells.push_back(g.slice_cols(b3, r, r + 1));
  }
  return g.concat_cols(cells);
}

}  // namespace xrmbt::nn
