// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode autodiff over dense 2D tensors. Forward values are
// computed eagerly at node creation; creation order doubles as topological
// order for the backward sweep. No broadcasting: shapes must match exactly,
// with explicit repeat/tile ops to expand.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "xrmbt/kernels.hpp"
#include "xrmbt/tensor.hpp"

namespace xrmbt::ad {

enum class Op {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,       // x * c
  kShift,       // x + c
  kRelu,
  kSqrt,
  kSoftmaxRows,
  kRowSum,       // [r,c] -> [r,1]
  kMaxPoolRows,  // [b*p,c] -> [b,c], max over each p-row block
  kMeanPoolRows, // [b*p,c] -> [b,c]
  kRepeatRows,   // [b,c] -> [b*p,c], each row repeated p times
  kTileCols,     // [r,1] -> [r,c]
  kCausalMeanRows, // [b*w,c] -> [b*w,c]; row t of a block = mean of rows [0,t)
  kConcatCols,
  kSliceCols,
  kTranspose,
  kReshape,
  kRotCompose,   // [b,9] x [b,9] -> [b,9], per-row 3x3 matrix product
  kRotApply,     // [b,9] x [b,3] -> [b,3], per-row matrix * vector
  kNllMeanRows,  // probs [r,c] + labels -> [1,1]; mean of -log p[i, label_i]
  kSumAll,       // [r,c] -> [1,1]
  kMeanAll,      // [r,c] -> [1,1]
  kPcSurfaceLoss,  // joint positions [b,J*3] -> [1,1]; see pc_surface_loss
};

/// Probabilities below this floor are clamped inside kNllMeanRows; the
/// clamped entries get zero gradient.
inline constexpr double kNllFloor = 1e-12;

using NodeId = int;

template <typename T>
struct Node {
  Op op = Op::kLeaf;
  NodeId a = -1;
  NodeId b = -1;
  Tensor<T> val;
  Tensor<T> grad;  // allocated lazily during backward
  bool needs_grad = false;
  // op-specific payloads
  int i0 = 0;  // slice start / pool block size / repeat count / window
  int i1 = 0;  // slice end
  T c0 = T(0);
  std::vector<int> iaux;  // labels for nll, argmax rows for maxpool, capsule joint pairs
  std::vector<T> faux;    // capsule radii
  Tensor<T> taux;         // point payload for kPcSurfaceLoss
};

template <typename T>
class Graph {
 public:
  NodeId constant(Tensor<T> t) { return push(Op::kLeaf, -1, -1, std::move(t), false); }

  NodeId param(Tensor<T> t) { return push(Op::kLeaf, -1, -1, std::move(t), true); }

  NodeId matmul(NodeId a, NodeId b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    require(ta.is_2d() && tb.is_2d() && ta.cols() == tb.rows(),
            "matmul shape mismatch", ta.shape, tb.shape);
    Tensor<T> out = Tensor<T>::zeros({ta.rows(), tb.cols()});
    kernels::gemm_nn(ta.data.data(), tb.data.data(), out.data.data(), ta.rows(), ta.cols(),
                     tb.cols());
    return push(Op::kMatmul, a, b, std::move(out));
  }

  NodeId add(NodeId a, NodeId b) { return ewise(Op::kAdd, a, b); }
  NodeId sub(NodeId a, NodeId b) { return ewise(Op::kSub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return ewise(Op::kMul, a, b); }
  NodeId div(NodeId a, NodeId b) { return ewise(Op::kDiv, a, b); }

  NodeId scale(NodeId a, T c) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v *= c;
    NodeId id = push(Op::kScale, a, -1, std::move(out));
    node(id).c0 = c;
    return id;
  }

  NodeId shift(NodeId a, T c) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v += c;
    NodeId id = push(Op::kShift, a, -1, std::move(out));
    node(id).c0 = c;
    return id;
  }

  NodeId relu(NodeId a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return push(Op::kRelu, a, -1, std::move(out));
  }

  NodeId sqrt(NodeId a) {
    Tensor<T> out = val(a);
    for (T& v : out.data) {
      if (v < T(0)) throw std::domain_error("sqrt of negative value in graph");
      v = std::sqrt(v);
    }
    return push(Op::kSqrt, a, -1, std::move(out));
  }

  NodeId softmax_rows(NodeId a) {
    const auto& ta = val(a);
    require(ta.is_2d(), "softmax_rows expects 2D", ta.shape, {});
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    const int r = ta.rows(), c = ta.cols();
    kernels::parallel_for(r, 4 * c, [&](int i) {
      const T* in = ta.data.data() + static_cast<std::int64_t>(i) * c;
      T* o = out.data.data() + static_cast<std::int64_t>(i) * c;
      T mx = in[0];
      for (int j = 1; j < c; ++j) mx = std::max(mx, in[j]);
      double sum = 0.0;
      for (int j = 0; j < c; ++j) {
        o[j] = std::exp(in[j] - mx);
        sum += static_cast<double>(o[j]);
      }
      const T inv = static_cast<T>(1.0 / sum);
      for (int j = 0; j < c; ++j) o[j] *= inv;
    });
    return push(Op::kSoftmaxRows, a, -1, std::move(out));
  }

  NodeId row_sum(NodeId a) {
    const auto& ta = val(a);
    require(ta.is_2d(), "row_sum expects 2D", ta.shape, {});
    Tensor<T> out = Tensor<T>::zeros({ta.rows(), 1});
    for (int i = 0; i < ta.rows(); ++i) {
      T s = T(0);
      for (int j = 0; j < ta.cols(); ++j) s += ta.at(i, j);
      out.at(i, 0) = s;
    }
    return push(Op::kRowSum, a, -1, std::move(out));
  }

  /// Max over each block of `block` consecutive rows (PointNet max pool).
  /// Ties keep the lowest row index, so the value is exactly permutation
  /// invariant and the subgradient is deterministic.
  NodeId max_pool_rows(NodeId a, int block) {
    const auto& ta = val(a);
    require(ta.is_2d() && block > 0 && ta.rows() % block == 0, "max_pool_rows bad block",
            ta.shape, {block});
    const int nb = ta.rows() / block, c = ta.cols();
    Tensor<T> out = Tensor<T>::zeros({nb, c});
    std::vector<int> arg(static_cast<size_t>(nb) * c, 0);
    for (int bidx = 0; bidx < nb; ++bidx) {
      for (int j = 0; j < c; ++j) {
        int best = bidx * block;
        T bv = ta.at(best, j);
        for (int r = bidx * block + 1; r < (bidx + 1) * block; ++r) {
          if (ta.at(r, j) > bv) {
            bv = ta.at(r, j);
            best = r;
          }
        }
        out.at(bidx, j) = bv;
        arg[static_cast<size_t>(bidx) * c + j] = best;
      }
    }
    NodeId id = push(Op::kMaxPoolRows, a, -1, std::move(out));
    node(id).i0 = block;
    node(id).iaux = std::move(arg);
    return id;
  }

  NodeId mean_pool_rows(NodeId a, int block) {
    const auto& ta = val(a);
    require(ta.is_2d() && block > 0 && ta.rows() % block == 0, "mean_pool_rows bad block",
            ta.shape, {block});
    const int nb = ta.rows() / block, c = ta.cols();
    Tensor<T> out = Tensor<T>::zeros({nb, c});
    for (int bidx = 0; bidx < nb; ++bidx)
      for (int j = 0; j < c; ++j) {
        double s = 0.0;
        for (int r = bidx * block; r < (bidx + 1) * block; ++r) s += static_cast<double>(ta.at(r, j));
        out.at(bidx, j) = static_cast<T>(s / block);
      }
    NodeId id = push(Op::kMeanPoolRows, a, -1, std::move(out));
    node(id).i0 = block;
    return id;
  }

  NodeId repeat_rows(NodeId a, int reps) {
    const auto& ta = val(a);
    require(ta.is_2d() && reps > 0, "repeat_rows bad reps", ta.shape, {reps});
    const int r = ta.rows(), c = ta.cols();
    Tensor<T> out = Tensor<T>::zeros({r * reps, c});
    for (int i = 0; i < r * reps; ++i)
      for (int j = 0; j < c; ++j) out.at(i, j) = ta.at(i / reps, j);
    NodeId id = push(Op::kRepeatRows, a, -1, std::move(out));
    node(id).i0 = reps;
    return id;
  }

  NodeId tile_cols(NodeId a, int cols) {
    const auto& ta = val(a);
    require(ta.is_2d() && ta.cols() == 1 && cols > 0, "tile_cols expects [r,1]", ta.shape,
            {cols});
    Tensor<T> out = Tensor<T>::zeros({ta.rows(), cols});
    for (int i = 0; i < ta.rows(); ++i)
      for (int j = 0; j < cols; ++j) out.at(i, j) = ta.at(i, 0);
    NodeId id = push(Op::kTileCols, a, -1, std::move(out));
    node(id).i0 = cols;
    return id;
  }

  /// For each block of `window` rows, row t becomes the mean of rows [0, t)
  /// of that block; row 0 is zero. Used for causal history pooling.
  NodeId causal_mean_rows(NodeId a, int window) {
    const auto& ta = val(a);
    require(ta.is_2d() && window > 0 && ta.rows() % window == 0, "causal_mean_rows bad window",
            ta.shape, {window});
    const int nb = ta.rows() / window, c = ta.cols();
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    for (int bidx = 0; bidx < nb; ++bidx) {
      std::vector<double> run(c, 0.0);
      for (int t = 0; t < window; ++t) {
        const int row = bidx * window + t;
        if (t > 0)
          for (int j = 0; j < c; ++j) out.at(row, j) = static_cast<T>(run[j] / t);
        for (int j = 0; j < c; ++j) run[j] += static_cast<double>(ta.at(row, j));
      }
    }
    NodeId id = push(Op::kCausalMeanRows, a, -1, std::move(out));
    node(id).i0 = window;
    return id;
  }

  NodeId concat_cols(NodeId a, NodeId b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    require(ta.is_2d() && tb.is_2d() && ta.rows() == tb.rows(), "concat_cols row mismatch",
            ta.shape, tb.shape);
    Tensor<T> out = Tensor<T>::zeros({ta.rows(), ta.cols() + tb.cols()});
    for (int i = 0; i < ta.rows(); ++i) {
      for (int j = 0; j < ta.cols(); ++j) out.at(i, j) = ta.at(i, j);
      for (int j = 0; j < tb.cols(); ++j) out.at(i, ta.cols() + j) = tb.at(i, j);
    }
    return push(Op::kConcatCols, a, b, std::move(out));
  }

  NodeId concat_cols(const std::vector<NodeId>& parts) {
    require(!parts.empty(), "concat_cols needs at least one tensor", {}, {});
    NodeId cur = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) cur = concat_cols(cur, parts[i]);
    return cur;
  }

  NodeId slice_cols(NodeId a, int c0, int c1) {
    const auto& ta = val(a);
    require(ta.is_2d() && 0 <= c0 && c0 < c1 && c1 <= ta.cols(), "slice_cols out of range",
            ta.shape, {c0, c1});
    Tensor<T> out = Tensor<T>::zeros({ta.rows(), c1 - c0});
    for (int i = 0; i < ta.rows(); ++i)
      for (int j = c0; j < c1; ++j) out.at(i, j - c0) = ta.at(i, j);
    NodeId id = push(Op::kSliceCols, a, -1, std::move(out));
    node(id).i0 = c0;
    node(id).i1 = c1;
    return id;
  }

  NodeId transpose(NodeId a) {
    const auto& ta = val(a);
    require(ta.is_2d(), "transpose expects 2D", ta.shape, {});
    Tensor<T> out = Tensor<T>::zeros({ta.cols(), ta.rows()});
    for (int i = 0; i < ta.rows(); ++i)
      for (int j = 0; j < ta.cols(); ++j) out.at(j, i) = ta.at(i, j);
    return push(Op::kTranspose, a, -1, std::move(out));
  }

  NodeId reshape(NodeId a, std::vector<int> s) {
    const auto& ta = val(a);
    require(Tensor<T>::count(s) == ta.size(), "reshape size mismatch", ta.shape, s);
    Tensor<T> out;
    out.shape = std::move(s);
    out.data = ta.data;
    return push(Op::kReshape, a, -1, std::move(out));
  }

  /// Per-row product of 3x3 matrices stored row-major as 9 columns.
  NodeId rot_compose(NodeId a, NodeId b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    require(ta.is_2d() && tb.is_2d() && ta.cols() == 9 && tb.cols() == 9 &&
                ta.rows() == tb.rows(),
            "rot_compose expects matching [b,9]", ta.shape, tb.shape);
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    for (int i = 0; i < ta.rows(); ++i) {
      const T* A = &ta.at(i, 0);
      const T* B = &tb.at(i, 0);
      T* C = &out.at(i, 0);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          C[3 * r + c] = A[3 * r + 0] * B[c] + A[3 * r + 1] * B[3 + c] + A[3 * r + 2] * B[6 + c];
    }
    return push(Op::kRotCompose, a, b, std::move(out));
  }

  /// Per-row matrix-vector product: out = R * v.
  NodeId rot_apply(NodeId a, NodeId b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    require(ta.is_2d() && tb.is_2d() && ta.cols() == 9 && tb.cols() == 3 &&
                ta.rows() == tb.rows(),
            "rot_apply expects [b,9] and [b,3]", ta.shape, tb.shape);
    Tensor<T> out = Tensor<T>::zeros({ta.rows(), 3});
    for (int i = 0; i < ta.rows(); ++i) {
      const T* R = &ta.at(i, 0);
      const T* v = &tb.at(i, 0);
      T* o = &out.at(i, 0);
      for (int r = 0; r < 3; ++r) o[r] = R[3 * r] * v[0] + R[3 * r + 1] * v[1] + R[3 * r + 2] * v[2];
    }
    return push(Op::kRotApply, a, b, std::move(out));
  }

  /// Mean over rows of -log(probs[i, labels[i]]). Inputs are probabilities
  /// (rows already softmax-normalized).
  NodeId nll_mean_rows(NodeId a, std::vector<int> labels) {
    const auto& ta = val(a);
    require(ta.is_2d() && static_cast<int>(labels.size()) == ta.rows(),
            "nll_mean_rows needs one label per row", ta.shape,
            {static_cast<int>(labels.size())});
    double s = 0.0;
    for (int i = 0; i < ta.rows(); ++i) {
      const int l = labels[i];
      require(0 <= l && l < ta.cols(), "label out of range", ta.shape, {l});
      s -= std::log(std::max(static_cast<double>(ta.at(i, l)), kNllFloor));
    }
    Tensor<T> out = Tensor<T>::zeros({1, 1});
    out.data[0] = static_cast<T>(s / ta.rows());
    NodeId id = push(Op::kNllMeanRows, a, -1, std::move(out));
    node(id).iaux = std::move(labels);
    return id;
  }

  NodeId sum_all(NodeId a) {
    const auto& ta = val(a);
    double s = 0.0;
    for (T v : ta.data) s += static_cast<double>(v);
    Tensor<T> out = Tensor<T>::zeros({1, 1});
    out.data[0] = static_cast<T>(s);
    return push(Op::kSumAll, a, -1, std::move(out));
  }

  NodeId mean_all(NodeId a) {
    const auto& ta = val(a);
    require(ta.size() > 0, "mean_all of empty tensor", ta.shape, {});
    double s = 0.0;
    for (T v : ta.data) s += static_cast<double>(v);
    Tensor<T> out = Tensor<T>::zeros({1, 1});
    out.data[0] = static_cast<T>(s / ta.size());
    return push(Op::kMeanAll, a, -1, std::move(out));
  }

  /// Mean over all frames and points of the distance to the nearest capsule
  /// surface (0 on/inside). `joints` is [b, J*3] world positions; `points` is
  /// [b*ppf, 3]; capsule c spans joints pairs[2c] -> pairs[2c+1] with radius
  /// radii[c]. Gradients flow to the capsule endpoints through the argmin
  /// capsule and the clamped segment projection (both held fixed, which is
  /// the correct subgradient almost everywhere).
  NodeId pc_surface_loss(NodeId joints, Tensor<T> points, std::vector<int> pairs,
                         std::vector<T> radii, int points_per_frame) {
    const auto& tj = val(joints);
    require(tj.is_2d() && tj.cols() % 3 == 0, "pc_surface_loss joints must be [b,J*3]",
            tj.shape, {});
    require(points.is_2d() && points.cols() == 3 &&
                points.rows() == tj.rows() * points_per_frame,
            "pc_surface_loss points must be [b*ppf,3]", points.shape,
            {tj.rows(), points_per_frame});
    require(pairs.size() == 2 * radii.size() && !radii.empty(),
            "pc_surface_loss capsule spec mismatch", {static_cast<int>(pairs.size())},
            {static_cast<int>(radii.size())});
    const int cj = tj.cols();
    for (int idx : pairs) require(0 <= idx && 3 * idx + 2 < cj, "capsule joint out of range",
                                  tj.shape, {idx});
    const int b = tj.rows(), nc = static_cast<int>(radii.size());
    double sum = 0.0;
    for (int f = 0; f < b; ++f) {
      const T* jp = &tj.at(f, 0);
      for (int i = 0; i < points_per_frame; ++i) {
        const T* p = &points.at(f * points_per_frame + i, 0);
        T best = std::numeric_limits<T>::max();
        for (int c = 0; c < nc; ++c) {
          const T d = capsule_dist(p, jp, pairs[2 * c], pairs[2 * c + 1], radii[c]);
          if (d < best) best = d;
        }
        sum += static_cast<double>(best);
      }
    }
    Tensor<T> out = Tensor<T>::zeros({1, 1});
    out.data[0] = static_cast<T>(sum / (static_cast<double>(b) * points_per_frame));
    NodeId id = push(Op::kPcSurfaceLoss, joints, -1, std::move(out));
    Node<T>& n = node(id);
    n.i0 = points_per_frame;
    n.iaux = std::move(pairs);
    n.faux = std::move(radii);
    n.taux = std::move(points);
    return id;
  }

  /// Reverse sweep from a scalar node. Zeroes all gradients first.
  void backward(NodeId loss) {
    if (val(loss).size() != 1)
      throw std::invalid_argument("backward requires a scalar loss node, got shape " +
                                  shape_str(val(loss).shape));
    for (auto& n : nodes_) n.grad = Tensor<T>();
    grad_of(loss).data[0] = T(1);
    for (NodeId id = loss; id >= 0; --id) {
      Node<T>& n = nodes_[id];
      if (!n.needs_grad || n.op == Op::kLeaf) continue;
      if (n.grad.data.empty()) continue;  // not on any path to the loss
      backprop_node(n);
    }
  }

  const Tensor<T>& val(NodeId id) const { return nodes_[id].val; }
  Tensor<T>& grad_of(NodeId id) {
    Node<T>& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.val.shape);
    return n.grad;
  }
  /// Gradient or zeros if the node never received one.
  Tensor<T> grad(NodeId id) const {
    const Node<T>& n = nodes_[id];
    if (n.grad.data.empty()) return Tensor<T>::zeros(n.val.shape);
    return n.grad;
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  Node<T>& node(NodeId id) { return nodes_[id]; }

  static void require(bool ok, const char* msg, const std::vector<int>& sa,
                      const std::vector<int>& sb) {
    if (!ok)
      throw std::invalid_argument(std::string(msg) + ": " + shape_str(sa) + " vs " +
                                  shape_str(sb));
  }

  NodeId push(Op op, NodeId a, NodeId b, Tensor<T> v, bool leaf_needs_grad = false) {
    Node<T> n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = std::move(v);
    if (op == Op::kLeaf)
      n.needs_grad = leaf_needs_grad;
    else
      n.needs_grad = (a >= 0 && nodes_[a].needs_grad) || (b >= 0 && nodes_[b].needs_grad);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
  }

  NodeId ewise(Op op, NodeId a, NodeId b) {
    const auto& ta = val(a);
    const auto& tb = val(b);
    require(ta.same_shape(tb), "elementwise shape mismatch", ta.shape, tb.shape);
    Tensor<T> out = Tensor<T>::zeros(ta.shape);
    const size_t n = ta.data.size();
    switch (op) {
      case Op::kAdd:
        for (size_t i = 0; i < n; ++i) out.data[i] = ta.data[i] + tb.data[i];
        break;
      case Op::kSub:
        for (size_t i = 0; i < n; ++i) out.data[i] = ta.data[i] - tb.data[i];
        break;
      case Op::kMul:
        for (size_t i = 0; i < n; ++i) out.data[i] = ta.data[i] * tb.data[i];
        break;
      case Op::kDiv:
        for (size_t i = 0; i < n; ++i) out.data[i] = ta.data[i] / tb.data[i];
        break;
      default:
        throw std::logic_error("not an elementwise op");
    }
    return push(op, a, b, std::move(out));
  }

  bool wants(NodeId id) const { return id >= 0 && nodes_[id].needs_grad; }

  void backprop_node(Node<T>& n) {
    const Tensor<T>& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        const auto& ta = nodes_[n.a].val;
        const auto& tb = nodes_[n.b].val;
        const int m = ta.rows(), k = ta.cols(), nn = tb.cols();
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          kernels::gemm_nt_acc(g.data.data(), tb.data.data(), ga.data.data(), m, nn, k);
        }
        if (wants(n.b)) {
          Tensor<T>& gb = grad_of(n.b);
          kernels::gemm_tn_acc(ta.data.data(), g.data.data(), gb.data.data(), k, m, nn);
        }
        break;
      }
      case Op::kAdd: {
        if (wants(n.a)) acc(grad_of(n.a), g, T(1));
        if (wants(n.b)) acc(grad_of(n.b), g, T(1));
        break;
      }
      case Op::kSub: {
        if (wants(n.a)) acc(grad_of(n.a), g, T(1));
        if (wants(n.b)) acc(grad_of(n.b), g, T(-1));
        break;
      }
      case Op::kMul: {
        const auto& ta = nodes_[n.a].val;
        const auto& tb = nodes_[n.b].val;
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * tb.data[i];
        }
        if (wants(n.b)) {
          Tensor<T>& gb = grad_of(n.b);
          for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * ta.data[i];
        }
        break;
      }
      case Op::kDiv: {
        const auto& ta = nodes_[n.a].val;
        const auto& tb = nodes_[n.b].val;
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] / tb.data[i];
        }
        if (wants(n.b)) {
          Tensor<T>& gb = grad_of(n.b);
          for (size_t i = 0; i < g.data.size(); ++i)
            gb.data[i] -= g.data[i] * ta.data[i] / (tb.data[i] * tb.data[i]);
        }
        break;
      }
      case Op::kScale: {
        if (wants(n.a)) acc(grad_of(n.a), g, n.c0);
        break;
      }
      case Op::kShift: {
        if (wants(n.a)) acc(grad_of(n.a), g, T(1));
        break;
      }
      case Op::kRelu: {
        if (wants(n.a)) {
          const auto& ta = nodes_[n.a].val;
          Tensor<T>& ga = grad_of(n.a);
          for (size_t i = 0; i < g.data.size(); ++i)
            if (ta.data[i] > T(0)) ga.data[i] += g.data[i];
        }
        break;
      }
      case Op::kSqrt: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (size_t i = 0; i < g.data.size(); ++i)
            if (n.val.data[i] > T(0)) ga.data[i] += g.data[i] * T(0.5) / n.val.data[i];
        }
        break;
      }
      case Op::kSoftmaxRows: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          const int r = n.val.rows(), c = n.val.cols();
          for (int i = 0; i < r; ++i) {
            double dot = 0.0;
            for (int j = 0; j < c; ++j)
              dot += static_cast<double>(g.at(i, j)) * static_cast<double>(n.val.at(i, j));
            for (int j = 0; j < c; ++j)
              ga.at(i, j) += n.val.at(i, j) * (g.at(i, j) - static_cast<T>(dot));
          }
        }
        break;
      }
      case Op::kRowSum: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (int i = 0; i < ga.rows(); ++i)
            for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, 0);
        }
        break;
      }
      case Op::kMaxPoolRows: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          const int nb = n.val.rows(), c = n.val.cols();
          for (int bidx = 0; bidx < nb; ++bidx)
            for (int j = 0; j < c; ++j)
              ga.at(n.iaux[static_cast<size_t>(bidx) * c + j], j) += g.at(bidx, j);
        }
        break;
      }
      case Op::kMeanPoolRows: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          const int block = n.i0, c = n.val.cols();
          for (int i = 0; i < ga.rows(); ++i)
            for (int j = 0; j < c; ++j) ga.at(i, j) += g.at(i / block, j) / static_cast<T>(block);
        }
        break;
      }
      case Op::kRepeatRows: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          const int reps = n.i0, c = n.val.cols();
          for (int i = 0; i < n.val.rows(); ++i)
            for (int j = 0; j < c; ++j) ga.at(i / reps, j) += g.at(i, j);
        }
        break;
      }
      case Op::kTileCols: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (int i = 0; i < n.val.rows(); ++i) {
            T s = T(0);
            for (int j = 0; j < n.val.cols(); ++j) s += g.at(i, j);
            ga.at(i, 0) += s;
          }
        }
        break;
      }
      case Op::kCausalMeanRows: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          const int w = n.i0, c = n.val.cols(), nb = n.val.rows() / w;
          for (int bidx = 0; bidx < nb; ++bidx)
            for (int s = 0; s < w; ++s)
              for (int t = s + 1; t < w; ++t)
                for (int j = 0; j < c; ++j)
                  ga.at(bidx * w + s, j) += g.at(bidx * w + t, j) / static_cast<T>(t);
        }
        break;
      }
      case Op::kConcatCols: {
        const int ca = nodes_[n.a].val.cols();
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (int i = 0; i < ga.rows(); ++i)
            for (int j = 0; j < ca; ++j) ga.at(i, j) += g.at(i, j);
        }
        if (wants(n.b)) {
          Tensor<T>& gb = grad_of(n.b);
          for (int i = 0; i < gb.rows(); ++i)
            for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(i, ca + j);
        }
        break;
      }
      case Op::kSliceCols: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (int i = 0; i < n.val.rows(); ++i)
            for (int j = 0; j < n.val.cols(); ++j) ga.at(i, n.i0 + j) += g.at(i, j);
        }
        break;
      }
      case Op::kTranspose: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (int i = 0; i < n.val.rows(); ++i)
            for (int j = 0; j < n.val.cols(); ++j) ga.at(j, i) += g.at(i, j);
        }
        break;
      }
      case Op::kReshape: {
        if (wants(n.a)) {
          Tensor<T>& ga = grad_of(n.a);
          for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }
        break;
      }
      case Op::kRotCompose: {
        const auto& ta = nodes_[n.a].val;
        const auto& tb = nodes_[n.b].val;
        for (int i = 0; i < n.val.rows(); ++i) {
          const T* A = &ta.at(i, 0);
          const T* B = &tb.at(i, 0);
          const T* G = &g.at(i, 0);
          if (wants(n.a)) {
            T* GA = &grad_of(n.a).at(i, 0);
            // dA = G * B^T
            for (int r = 0; r < 3; ++r)
              for (int c = 0; c < 3; ++c)
                GA[3 * r + c] +=
                    G[3 * r + 0] * B[3 * c + 0] + G[3 * r + 1] * B[3 * c + 1] + G[3 * r + 2] * B[3 * c + 2];
          }
          if (wants(n.b)) {
            T* GB = &grad_of(n.b).at(i, 0);
            // dB = A^T * G
            for (int r = 0; r < 3; ++r)
              for (int c = 0; c < 3; ++c)
                GB[3 * r + c] +=
                    A[r] * G[c] + A[3 + r] * G[3 + c] + A[6 + r] * G[6 + c];
          }
        }
        break;
      }
      case Op::kRotApply: {
        const auto& ta = nodes_[n.a].val;
        const auto& tb = nodes_[n.b].val;
        for (int i = 0; i < n.val.rows(); ++i) {
          const T* R = &ta.at(i, 0);
          const T* v = &tb.at(i, 0);
          const T* G = &g.at(i, 0);
          if (wants(n.a)) {
            T* GR = &grad_of(n.a).at(i, 0);
            for (int r = 0; r < 3; ++r)
              for (int c = 0; c < 3; ++c) GR[3 * r + c] += G[r] * v[c];
          }
          if (wants(n.b)) {
            T* GV = &grad_of(n.b).at(i, 0);
            for (int c = 0; c < 3; ++c) GV[c] += R[c] * G[0] + R[3 + c] * G[1] + R[6 + c] * G[2];
          }
        }
        break;
      }
      case Op::kNllMeanRows: {
        if (wants(n.a)) {
          const auto& ta = nodes_[n.a].val;
          Tensor<T>& ga = grad_of(n.a);
          const T gs = g.data[0];
          const int r = ta.rows();
          for (int i = 0; i < r; ++i) {
            const int l = n.iaux[i];
            const double p = static_cast<double>(ta.at(i, l));
            if (p > kNllFloor) ga.at(i, l) -= static_cast<T>(gs / (p * r));
          }
        }
        break;
      }
      case Op::kSumAll: {
        if (wants(n.a)) acc_scalar(grad_of(n.a), g.data[0]);
        break;
      }
      case Op::kMeanAll: {
        if (wants(n.a))
          acc_scalar(grad_of(n.a), g.data[0] / static_cast<T>(nodes_[n.a].val.size()));
        break;
      }
      case Op::kPcSurfaceLoss: {
        if (!wants(n.a)) break;
        const auto& tj = nodes_[n.a].val;
        Tensor<T>& gj = grad_of(n.a);
        const int b = tj.rows(), ppf = n.i0, nc = static_cast<int>(n.faux.size());
        const T gs = g.data[0] / static_cast<T>(static_cast<double>(b) * ppf);
        for (int f = 0; f < b; ++f) {
          const T* jp = &tj.at(f, 0);
          for (int i = 0; i < ppf; ++i) {
            const T* p = &n.taux.at(f * ppf + i, 0);
            T best = std::numeric_limits<T>::max();
            int bc = 0;
            for (int c = 0; c < nc; ++c) {
              const T d = capsule_dist(p, jp, n.iaux[2 * c], n.iaux[2 * c + 1], n.faux[c]);
              if (d < best) {
                best = d;
                bc = c;
              }
            }
            if (best <= T(0)) continue;  // inside a capsule: flat region
            const int ja = n.iaux[2 * bc], jb = n.iaux[2 * bc + 1];
            const T* a = jp + 3 * ja;
            const T* bb = jp + 3 * jb;
            T ab[3] = {bb[0] - a[0], bb[1] - a[1], bb[2] - a[2]};
            const T len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
            T t = T(0);
            if (len2 > T(0)) {
              t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] + (p[2] - a[2]) * ab[2]) / len2;
              t = t < T(0) ? T(0) : (t > T(1) ? T(1) : t);
            }
            T diff[3] = {p[0] - (a[0] + t * ab[0]), p[1] - (a[1] + t * ab[1]),
                         p[2] - (a[2] + t * ab[2])};
            const T dist = std::sqrt(diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]);
            if (dist <= T(0)) continue;
            // d(dist)/d(a) = -(1-t) * u, d(dist)/d(b) = -t * u with u = diff/dist
            for (int k = 0; k < 3; ++k) {
              const T u = diff[k] / dist;
              gj.at(f, 3 * ja + k) -= gs * (T(1) - t) * u;
              gj.at(f, 3 * jb + k) -= gs * t * u;
            }
          }
        }
        break;
      }
    }
  }

  static void acc(Tensor<T>& dst, const Tensor<T>& src, T s) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += s * src.data[i];
  }
  static void acc_scalar(Tensor<T>& dst, T v) {
    for (T& d : dst.data) d += v;
  }

  /// Hinged distance from point p to the capsule surface spanning joints
  /// ja -> jb of one frame's flattened joint row.
  static T capsule_dist(const T* p, const T* jp, int ja, int jb, T radius) {
    const T* a = jp + 3 * ja;
    const T* b = jp + 3 * jb;
    T ab[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const T len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    T t = T(0);
    if (len2 > T(0)) {
      t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] + (p[2] - a[2]) * ab[2]) / len2;
      t = t < T(0) ? T(0) : (t > T(1) ? T(1) : t);
    }
    T dx = p[0] - (a[0] + t * ab[0]);
    T dy = p[1] - (a[1] + t * ab[1]);
    T dz = p[2] - (a[2] + t * ab[2]);
    const T d = std::sqrt(dx * dx + dy * dy + dz * dz) - radius;
    return d > T(0) ? d : T(0);
  }

  std::vector<Node<T>> nodes_;
};

}  // namespace xrmbt::ad
