#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "coopsteer/errors.hpp"
#include "coopsteer/tensor.hpp"

namespace coopsteer {

namespace detail {

// Direct convolution over HWC input with OIHW-free layout: kernels are
// [kh, kw, Cin, Cout] so the innermost loop runs over contiguous Cout.
template <typename T>
void conv2d_forward(const T* in, std::size_t h, std::size_t w, std::size_t ci, const T* k,
                    std::size_t kh, std::size_t kw, std::size_t co, const T* bias, T* out,
                    std::size_t ho, std::size_t wo, std::size_t sh, std::size_t sw,
                    std::size_t pt, std::size_t pl) {
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      T* orow = out + (oy * wo + ox) * co;
      for (std::size_t c = 0; c < co; ++c) orow[c] = bias ? bias[c] : T(0);
      for (std::size_t kr = 0; kr < kh; ++kr) {
        const std::ptrdiff_t y = std::ptrdiff_t(oy * sh + kr) - std::ptrdiff_t(pt);
        if (y < 0 || y >= std::ptrdiff_t(h)) continue;
        for (std::size_t kc = 0; kc < kw; ++kc) {
          const std::ptrdiff_t x = std::ptrdiff_t(ox * sw + kc) - std::ptrdiff_t(pl);
          if (x < 0 || x >= std::ptrdiff_t(w)) continue;
          const T* ipix = in + (std::size_t(y) * w + std::size_t(x)) * ci;
          const T* krow = k + ((kr * kw + kc) * ci) * co;
          for (std::size_t c = 0; c < ci; ++c) {
            const T v = ipix[c];
            const T* kk = krow + c * co;
            for (std::size_t f = 0; f < co; ++f) orow[f] += v * kk[f];
          }
        }
      }
    }
  }
}

// Accumulates input/kernel/bias gradients in one sweep over the output.
// Any of d_in / d_k / d_bias may be null when that operand needs no grad.
template <typename T>
void conv2d_backward(const T* in, T* d_in, std::size_t h, std::size_t w, std::size_t ci,
                     const T* k, T* d_k, std::size_t kh, std::size_t kw, std::size_t co,
                     T* d_bias, const T* d_out, std::size_t ho, std::size_t wo, std::size_t sh,
                     std::size_t sw, std::size_t pt, std::size_t pl) {
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      const T* grow = d_out + (oy * wo + ox) * co;
      if (d_bias)
        for (std::size_t f = 0; f < co; ++f) d_bias[f] += grow[f];
      for (std::size_t kr = 0; kr < kh; ++kr) {
        const std::ptrdiff_t y = std::ptrdiff_t(oy * sh + kr) - std::ptrdiff_t(pt);
        if (y < 0 || y >= std::ptrdiff_t(h)) continue;
        for (std::size_t kc = 0; kc < kw; ++kc) {
          const std::ptrdiff_t x = std::ptrdiff_t(ox * sw + kc) - std::ptrdiff_t(pl);
          if (x < 0 || x >= std::ptrdiff_t(w)) continue;
          const std::size_t pix = (std::size_t(y) * w + std::size_t(x)) * ci;
          const T* krow = k + ((kr * kw + kc) * ci) * co;
          for (std::size_t c = 0; c < ci; ++c) {
            const T* kk = krow + c * co;
            if (d_in) {
              T acc = T(0);
              for (std::size_t f = 0; f < co; ++f) acc += grow[f] * kk[f];
              d_in[pix + c] += acc;
            }
            if (d_k) {
              const T v = in[pix + c];
              T* dk = d_k + ((kr * kw + kc) * ci + c) * co;
              for (std::size_t f = 0; f < co; ++f) dk[f] += v * grow[f];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

// Define-by-run tape. Every op evaluates eagerly when recorded; the node
// list is topologically ordered by construction, so backward() is a single
// reverse sweep that visits each node exactly once.
//
// Leaves alias external tensor storage (no copies); those tensors must
// outlive the graph. A tape describes one forward pass: call reset() (or
// use a fresh graph) before building the next one.
template <typename T>
class graph {
 public:
  using id = std::uint32_t;

  enum class op : std::uint8_t {
    leaf,
    conv2d,
    matmul,
    affine,
    concat,
    reshape,
    add,
    sub,
    mul,
    relu,
    tanh_fn,
    sigmoid,
    sum,
    mse,
  };

  // When false, param() degrades to input(): no gradient bookkeeping at
  // all. Used by evaluation paths.
  bool grad_enabled = true;

  // Scans every op output for NaN/Inf. On by default in debug builds;
  // tests enable it explicitly.
#ifdef NDEBUG
  bool check_finite = false;
#else
  bool check_finite = true;
#endif

  id input(const tensor<T>& t) { return push_leaf(t.shape, t.values.data(), false); }

  id param(tensor<T>& t) {
    if (!grad_enabled || !t.requires_grad) return input(t);
    for (const auto& [ptr, nid] : params_)
      if (ptr == &t) return nid;
    const id nid = push_leaf(t.shape, t.values.data(), true);
    params_.push_back({&t, nid});
    return nid;
  }

  // Leaf whose storage lives inside the graph (e.g. all-zero initial LSTM
  // state). No gradient flows into it.
  id constant(tensor<T> t) {
    node n;
    n.kind = op::leaf;
    n.shape = std::move(t.shape);
    n.owned = std::move(t.values);
    n.data_ptr = n.owned.data();
    nodes_.push_back(std::move(n));
    return id(nodes_.size() - 1);
  }

  id conv2d(id in, id kernels, id bias, std::size_t sh, std::size_t sw) {
    const auto& si = nodes_[in].shape;
    const auto& sk = nodes_[kernels].shape;
    const auto& sb = nodes_[bias].shape;
    if (si.size() != 3 || sk.size() != 4 || sb.size() != 1)
      throw config_error("conv2d: expected input [H,W,Cin], kernels [kh,kw,Cin,Cout], bias "
                         "[Cout]; got " +
                         shape_str(si) + ", " + shape_str(sk) + ", " + shape_str(sb));
    if (si[2] != sk[2])
      throw config_error("conv2d: input channels " + shape_str(si) +
                         " do not match kernel channels " + shape_str(sk));
    if (sb[0] != sk[3])
      throw config_error("conv2d: bias " + shape_str(sb) + " does not match kernels " +
                         shape_str(sk));
    const auto gy = same_pad_axis(si[0], sk[0], sh);
    const auto gx = same_pad_axis(si[1], sk[1], sw);
    node n;
    n.kind = op::conv2d;
    n.shape = {gy.out, gx.out, sk[3]};
    n.in = {in, kernels, bias};
    n.n_in = 3;
    n.s0 = std::uint32_t(sh);
    n.s1 = std::uint32_t(sw);
    n.p0 = std::uint32_t(gy.pad_lo);
    n.p1 = std::uint32_t(gx.pad_lo);
    alloc_output(n);
    detail::conv2d_forward(data(in), si[0], si[1], si[2], data(kernels), sk[0], sk[1], sk[3],
                           data(bias), n.owned.data(), gy.out, gx.out, sh, sw, gy.pad_lo,
                           gx.pad_lo);
    return push(std::move(n));
  }

  id matmul(id a, id b) {
    const auto& sa = nodes_[a].shape;
    const auto& sb = nodes_[b].shape;
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
      throw config_error("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
    const std::size_t m = sa[0], k = sa[1], n_cols = sb[1];
    node n;
    n.kind = op::matmul;
    n.shape = {m, n_cols};
    n.in = {a, b};
    n.n_in = 2;
    alloc_output(n);
    const T* pa = data(a);
    const T* pb = data(b);
    T* out = n.owned.data();
    for (std::size_t i = 0; i < m; ++i) {
      T* orow = out + i * n_cols;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T v = pa[i * k + kk];
        const T* brow = pb + kk * n_cols;
        for (std::size_t j = 0; j < n_cols; ++j) orow[j] += v * brow[j];
      }
    }
    return push(std::move(n));
  }

  // y = x * W + b for a rank-1 x: the fused workhorse behind dense layers
  // and LSTM gates.
  id affine(id x, id w, id b) {
    const auto& sx = nodes_[x].shape;
    const auto& sw = nodes_[w].shape;
    const auto& sb = nodes_[b].shape;
    if (sx.size() != 1 || sw.size() != 2 || sb.size() != 1 || sx[0] != sw[0] || sb[0] != sw[1])
      throw config_error("affine: incompatible shapes x " + shape_str(sx) + ", W " +
                         shape_str(sw) + ", b " + shape_str(sb));
    const std::size_t in_dim = sw[0], out_dim = sw[1];
    node n;
    n.kind = op::affine;
    n.shape = {out_dim};
    n.in = {x, w, b};
    n.n_in = 3;
    alloc_output(n);
    const T* px = data(x);
    const T* pw = data(w);
    T* out = n.owned.data();
    std::copy(data(b), data(b) + out_dim, out);
    for (std::size_t i = 0; i < in_dim; ++i) {
      const T v = px[i];
      const T* wrow = pw + i * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) out[j] += v * wrow[j];
    }
    return push(std::move(n));
  }

  id concat(id a, id b) {
    const auto& sa = nodes_[a].shape;
    const auto& sb = nodes_[b].shape;
    if (sa.size() != 1 || sb.size() != 1)
      throw config_error("concat: rank-1 operands required, got " + shape_str(sa) + " and " +
                         shape_str(sb));
    node n;
    n.kind = op::concat;
    n.shape = {sa[0] + sb[0]};
    n.in = {a, b};
    n.n_in = 2;
    alloc_output(n);
    std::copy(data(a), data(a) + sa[0], n.owned.data());
    std::copy(data(b), data(b) + sb[0], n.owned.data() + sa[0]);
    return push(std::move(n));
  }

  // Pure metadata change; the output aliases the input buffer.
  id reshape(id x, shape_t target) {
    if (numel(target) != size(x))
      throw config_error("reshape: " + shape_str(nodes_[x].shape) + " cannot become " +
                         shape_str(target));
    node n;
    n.kind = op::reshape;
    n.shape = std::move(target);
    n.in = {x};
    n.n_in = 1;
    n.data_ptr = data(x);
    return push(std::move(n));
  }

  id add(id a, id b) { return binary(op::add, a, b); }
  id sub(id a, id b) { return binary(op::sub, a, b); }
  id mul(id a, id b) { return binary(op::mul, a, b); }

  id relu(id x) { return unary(op::relu, x, [](T v) { return v > T(0) ? v : T(0); }); }
  id tanh(id x) {
    return unary(op::tanh_fn, x, [](T v) { return std::tanh(v); });
  }
  id sigmoid(id x) {
    return unary(op::sigmoid, x, [](T v) { return T(1) / (T(1) + std::exp(-v)); });
  }

  id sum(id x) {
    node n;
    n.kind = op::sum;
    n.shape = {1};
    n.in = {x};
    n.n_in = 1;
    alloc_output(n);
    T acc = T(0);
    const T* px = data(x);
    for (std::size_t i = 0; i < size(x); ++i) acc += px[i];
    n.owned[0] = acc;
    return push(std::move(n));
  }

  id mse(id pred, id target) {
    if (size(pred) != size(target))
      throw config_error("mse: length mismatch " + shape_str(nodes_[pred].shape) + " vs " +
                         shape_str(nodes_[target].shape));
    if (size(pred) == 0) throw usage_error("mse: empty batch");
    node n;
    n.kind = op::mse;
    n.shape = {1};
    n.in = {pred, target};
    n.n_in = 2;
    alloc_output(n);
    const T* p = data(pred);
    const T* t = data(target);
    T acc = T(0);
    for (std::size_t i = 0; i < size(pred); ++i) {
      const T d = p[i] - t[i];
      acc += d * d;
    }
    n.owned[0] = acc / T(size(pred));
    return push(std::move(n));
  }

  const shape_t& shape(id nid) const { return nodes_[nid].shape; }
  std::size_t size(id nid) const { return numel(nodes_[nid].shape); }
  std::span<const T> value(id nid) const { return {data(nid), size(nid)}; }

  T scalar_value(id nid) const {
    if (size(nid) != 1) throw usage_error("scalar_value: node is not a scalar");
    return data(nid)[0];
  }

  // Gradient of the last backward() loss w.r.t. this node. Zero-length
  // span means the node did not participate.
  std::span<const T> adjoint(id nid) const {
    const auto& adj = nodes_[nid].adjoint;
    return {adj.data(), adj.size()};
  }

  std::size_t node_count() const { return nodes_.size(); }

  const std::vector<std::pair<tensor<T>*, id>>& registered_params() const { return params_; }

  // Reverse-mode sweep from a scalar loss. Every registered parameter ends
  // up with a populated gradient: accumulated adjoints where the parameter
  // is reachable from the loss, zeros where it is not.
  void backward(id loss, bool write_param_grads = true) {
    if (size(loss) != 1) throw usage_error("backward: loss must be a scalar, got shape " +
                                           shape_str(nodes_[loss].shape));
    if (backward_done_) throw usage_error("backward: tape already consumed; reset() first");
    backward_done_ = true;
    if (nodes_[loss].needs_grad) {
      ensure_adjoint(loss);
      nodes_[loss].adjoint[0] = T(1);
      for (id nid = loss + 1; nid-- > 0;) {
        node& n = nodes_[nid];
        if (n.adjoint.empty() || n.kind == op::leaf) continue;
        backward_node(n);
      }
    }
    if (!write_param_grads) return;
    for (auto& [t, nid] : params_) {
      if (t->grad.size() != t->values.size()) t->zero_grad();
      const auto& adj = nodes_[nid].adjoint;
      for (std::size_t i = 0; i < adj.size(); ++i) t->grad[i] += adj[i];
    }
  }

  void reset() {
    nodes_.clear();
    params_.clear();
    backward_done_ = false;
  }

 private:
  struct node {
    op kind = op::leaf;
    shape_t shape;
    const T* data_ptr = nullptr;  // external leaf storage or `owned`
    std::vector<T> owned;
    std::vector<T> adjoint;
    std::array<id, 3> in{};
    std::uint8_t n_in = 0;
    bool needs_grad = false;
    std::uint32_t s0 = 0, s1 = 0, p0 = 0, p1 = 0;  // conv stride/padding
  };

  std::vector<node> nodes_;
  std::vector<std::pair<tensor<T>*, id>> params_;
  bool backward_done_ = false;

  const T* data(id nid) const { return nodes_[nid].data_ptr; }

  void alloc_output(node& n) {
    n.owned.assign(numel(n.shape), T(0));
    n.data_ptr = n.owned.data();
  }

  id push_leaf(const shape_t& s, const T* storage, bool needs_grad) {
    node n;
    n.kind = op::leaf;
    n.shape = s;
    n.data_ptr = storage;
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return id(nodes_.size() - 1);
  }

  id push(node&& n) {
    for (std::uint8_t i = 0; i < n.n_in; ++i) n.needs_grad |= nodes_[n.in[i]].needs_grad;
    n.needs_grad &= grad_enabled;
    if (check_finite) {
      for (std::size_t i = 0; i < numel(n.shape); ++i)
        if (!std::isfinite(double(n.data_ptr[i])))
          throw numeric_error("non-finite value in forward op output");
    }
    nodes_.push_back(std::move(n));
    return id(nodes_.size() - 1);
  }

  id binary(op kind, id a, id b) {
    const std::size_t na = size(a);
    const std::size_t nb = size(b);
    // Broadcasting is scalar-vs-tensor only; anything else must match exactly.
    const bool scalar_bcast = (na == 1 || nb == 1);
    if (!scalar_bcast && nodes_[a].shape != nodes_[b].shape)
      throw config_error("elementwise: incompatible shapes " + shape_str(nodes_[a].shape) +
                         " and " + shape_str(nodes_[b].shape));
    node n;
    n.kind = kind;
    n.shape = na >= nb ? nodes_[a].shape : nodes_[b].shape;
    n.in = {a, b};
    n.n_in = 2;
    alloc_output(n);
    const T* pa = data(a);
    const T* pb = data(b);
    T* out = n.owned.data();
    const std::size_t len = numel(n.shape);
    for (std::size_t i = 0; i < len; ++i) {
      const T va = pa[na == 1 ? 0 : i];
      const T vb = pb[nb == 1 ? 0 : i];
      out[i] = kind == op::add ? va + vb : kind == op::sub ? va - vb : va * vb;
    }
    return push(std::move(n));
  }

  template <typename Fn>
  id unary(op kind, id x, Fn&& fn) {
    node n;
    n.kind = kind;
    n.shape = nodes_[x].shape;
    n.in = {x};
    n.n_in = 1;
    alloc_output(n);
    const T* px = data(x);
    T* out = n.owned.data();
    for (std::size_t i = 0; i < size(x); ++i) out[i] = fn(px[i]);
    return push(std::move(n));
  }

  T* ensure_adjoint(id nid) {
    auto& adj = nodes_[nid].adjoint;
    if (adj.empty()) adj.assign(numel(nodes_[nid].shape), T(0));
    return adj.data();
  }

  // Accumulates into input adjoints; inputs that do not need gradients are
  // skipped entirely.
  void backward_node(node& n) {
    const T* g = n.adjoint.data();
    const auto wants = [&](std::uint8_t slot) { return nodes_[n.in[slot]].needs_grad; };
    switch (n.kind) {
      case op::conv2d: {
        const node& ni = nodes_[n.in[0]];
        const node& nk = nodes_[n.in[1]];
        detail::conv2d_backward(ni.data_ptr, wants(0) ? ensure_adjoint(n.in[0]) : nullptr,
                                ni.shape[0], ni.shape[1], ni.shape[2], nk.data_ptr,
                                wants(1) ? ensure_adjoint(n.in[1]) : nullptr, nk.shape[0],
                                nk.shape[1], nk.shape[3],
                                wants(2) ? ensure_adjoint(n.in[2]) : nullptr, g, n.shape[0],
                                n.shape[1], n.s0, n.s1, n.p0, n.p1);
        break;
      }
      case op::matmul: {
        const node& na = nodes_[n.in[0]];
        const node& nb = nodes_[n.in[1]];
        const std::size_t m = na.shape[0], k = na.shape[1], cols = nb.shape[1];
        if (wants(0)) {
          T* da = ensure_adjoint(n.in[0]);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              T acc = T(0);
              const T* grow = g + i * cols;
              const T* brow = nb.data_ptr + kk * cols;
              for (std::size_t j = 0; j < cols; ++j) acc += grow[j] * brow[j];
              da[i * k + kk] += acc;
            }
        }
        if (wants(1)) {
          T* db = ensure_adjoint(n.in[1]);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              const T v = na.data_ptr[i * k + kk];
              const T* grow = g + i * cols;
              T* drow = db + kk * cols;
              for (std::size_t j = 0; j < cols; ++j) drow[j] += v * grow[j];
            }
        }
        break;
      }
      case op::affine: {
        const node& nx = nodes_[n.in[0]];
        const node& nw = nodes_[n.in[1]];
        const std::size_t in_dim = nw.shape[0], out_dim = nw.shape[1];
        if (wants(0)) {
          T* dx = ensure_adjoint(n.in[0]);
          for (std::size_t i = 0; i < in_dim; ++i) {
            T acc = T(0);
            const T* wrow = nw.data_ptr + i * out_dim;
            for (std::size_t j = 0; j < out_dim; ++j) acc += wrow[j] * g[j];
            dx[i] += acc;
          }
        }
        if (wants(1)) {
          T* dw = ensure_adjoint(n.in[1]);
          for (std::size_t i = 0; i < in_dim; ++i) {
            const T v = nx.data_ptr[i];
            T* drow = dw + i * out_dim;
            for (std::size_t j = 0; j < out_dim; ++j) drow[j] += v * g[j];
          }
        }
        if (wants(2)) {
          T* db = ensure_adjoint(n.in[2]);
          for (std::size_t j = 0; j < out_dim; ++j) db[j] += g[j];
        }
        break;
      }
      case op::concat: {
        const std::size_t na = numel(nodes_[n.in[0]].shape);
        if (wants(0)) {
          T* da = ensure_adjoint(n.in[0]);
          for (std::size_t i = 0; i < na; ++i) da[i] += g[i];
        }
        if (wants(1)) {
          T* db = ensure_adjoint(n.in[1]);
          const std::size_t nb = numel(nodes_[n.in[1]].shape);
          for (std::size_t i = 0; i < nb; ++i) db[i] += g[na + i];
        }
        break;
      }
      case op::reshape: {
        if (wants(0)) {
          T* dx = ensure_adjoint(n.in[0]);
          for (std::size_t i = 0; i < numel(n.shape); ++i) dx[i] += g[i];
        }
        break;
      }
      case op::add:
      case op::sub:
      case op::mul: {
        const std::size_t len = numel(n.shape);
        const std::size_t na = numel(nodes_[n.in[0]].shape);
        const std::size_t nb = numel(nodes_[n.in[1]].shape);
        const T* pa = nodes_[n.in[0]].data_ptr;
        const T* pb = nodes_[n.in[1]].data_ptr;
        if (wants(0)) {
          T* da = ensure_adjoint(n.in[0]);
          for (std::size_t i = 0; i < len; ++i) {
            const T go = n.kind == op::mul ? g[i] * pb[nb == 1 ? 0 : i] : g[i];
            da[na == 1 ? 0 : i] += go;
          }
        }
        if (wants(1)) {
          T* db = ensure_adjoint(n.in[1]);
          for (std::size_t i = 0; i < len; ++i) {
            T go = n.kind == op::mul ? g[i] * pa[na == 1 ? 0 : i]
                                     : (n.kind == op::sub ? -g[i] : g[i]);
            db[nb == 1 ? 0 : i] += go;
          }
        }
        break;
      }
      case op::relu: {
        if (wants(0)) {
          T* dx = ensure_adjoint(n.in[0]);
          const T* px = nodes_[n.in[0]].data_ptr;
          for (std::size_t i = 0; i < numel(n.shape); ++i)
            if (px[i] > T(0)) dx[i] += g[i];
        }
        break;
      }
      case op::tanh_fn: {
        if (wants(0)) {
          T* dx = ensure_adjoint(n.in[0]);
          const T* y = n.data_ptr;
          for (std::size_t i = 0; i < numel(n.shape); ++i) dx[i] += g[i] * (T(1) - y[i] * y[i]);
        }
        break;
      }
      case op::sigmoid: {
        if (wants(0)) {
          T* dx = ensure_adjoint(n.in[0]);
          const T* y = n.data_ptr;
          for (std::size_t i = 0; i < numel(n.shape); ++i) dx[i] += g[i] * y[i] * (T(1) - y[i]);
        }
        break;
      }
      case op::sum: {
        if (wants(0)) {
          T* dx = ensure_adjoint(n.in[0]);
          const std::size_t len = numel(nodes_[n.in[0]].shape);
          for (std::size_t i = 0; i < len; ++i) dx[i] += g[0];
        }
        break;
      }
      case op::mse: {
        const node& np = nodes_[n.in[0]];
        const node& nt = nodes_[n.in[1]];
        const std::size_t len = numel(np.shape);
        const T scale = g[0] * T(2) / T(len);
        if (wants(0)) {
          T* dp = ensure_adjoint(n.in[0]);
          for (std::size_t i = 0; i < len; ++i)
            dp[i] += scale * (np.data_ptr[i] - nt.data_ptr[i]);
        }
        if (wants(1)) {
          T* dt = ensure_adjoint(n.in[1]);
          for (std::size_t i = 0; i < len; ++i)
            dt[i] -= scale * (np.data_ptr[i] - nt.data_ptr[i]);
        }
        break;
      }
      case op::leaf:
        break;
    }
  }
};

// Central finite differences against a caller-supplied analytic gradient:
// returns max over the checked coordinates of
//   |analytic - (f(x+eps) - f(x-eps)) / 2eps| / max(1, |analytic|).
// `coords` empty means every coordinate.
template <typename F>
double finite_diff_check(F&& f, tensor<double> point, std::span<const double> analytic,
                         double eps, std::span<const std::size_t> coords = {}) {
  if (analytic.size() != point.size())
    throw usage_error("finite_diff_check: gradient length mismatch");
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(point.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = point.values[i];
    point.values[i] = saved + eps;
    const double hi = f(point);
    point.values[i] = saved - eps;
    const double lo = f(point);
    point.values[i] = saved;
    if (!std::isfinite(hi) || !std::isfinite(lo))
      throw numeric_error("finite_diff_check: non-finite function value");
    const double numeric = (hi - lo) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace coopsteer
