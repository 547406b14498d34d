#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coopsteer/autograd.hpp"
#include "coopsteer/tensor.hpp"

namespace coopsteer {

enum class activation : std::uint8_t { linear, relu, tanh };

template <typename T>
using named_param = std::pair<std::string, tensor<T>*>;

namespace detail {

// Glorot-uniform fill: bound = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_fill(tensor<T>& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values) v = T(dist(rng));
}

}  // namespace detail

template <typename T>
struct conv2d_layer {
  tensor<T> kernels;  // [kh, kw, Cin, Cout]
  tensor<T> bias;     // [Cout]
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  activation act = activation::relu;

  conv2d_layer() = default;
  conv2d_layer(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout, std::size_t sh,
               std::size_t sw, activation a = activation::relu)
      : kernels(shape_t{kh, kw, cin, cout}), bias(shape_t{cout}), stride_h(sh), stride_w(sw),
        act(a) {
    if (sh == 0 || sw == 0) throw config_error("conv2d_layer: stride components must be >= 1");
    kernels.mark_param();
    bias.mark_param();
  }

  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& s = kernels.shape;
    detail::glorot_fill(kernels, s[0] * s[1] * s[2], s[0] * s[1] * s[3], rng);
    std::fill(bias.values.begin(), bias.values.end(), T(0));
  }

  typename graph<T>::id apply(graph<T>& g, typename graph<T>::id in) {
    auto out = g.conv2d(in, g.param(kernels), g.param(bias), stride_h, stride_w);
    return act == activation::relu ? g.relu(out) : out;
  }

  void collect_params(const std::string& prefix, std::vector<named_param<T>>& out) {
    out.push_back({prefix + ".kernels", &kernels});
    out.push_back({prefix + ".bias", &bias});
  }
};

// Standard forget-gate LSTM, no peepholes. Gate weights each map the
// concatenated [x_t; h_prev] vector to the hidden size.
template <typename T>
struct lstm_layer {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  tensor<T> w_i, w_f, w_o, w_g;  // [input_size + hidden, hidden]
  tensor<T> b_i, b_f, b_o, b_g;  // [hidden]

  lstm_layer() = default;
  lstm_layer(std::size_t input, std::size_t hidden) : input_size(input), hidden_size(hidden) {
    const shape_t ws{input + hidden, hidden};
    const shape_t bs{hidden};
    for (tensor<T>* w : {&w_i, &w_f, &w_o, &w_g}) *w = tensor<T>(ws), w->mark_param();
    for (tensor<T>* b : {&b_i, &b_f, &b_o, &b_g}) *b = tensor<T>(bs), b->mark_param();
  }

  // Glorot weights, zero biases except the forget-gate bias at 1.0 so
  // early training does not immediately flush the cell state.
  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (tensor<T>* w : {&w_i, &w_f, &w_o, &w_g})
      detail::glorot_fill(*w, input_size + hidden_size, hidden_size, rng);
    for (tensor<T>* b : {&b_i, &b_o, &b_g}) std::fill(b->values.begin(), b->values.end(), T(0));
    std::fill(b_f.values.begin(), b_f.values.end(), T(1));
  }

  struct state {
    typename graph<T>::id h;
    typename graph<T>::id c;
  };

  state step(graph<T>& g, typename graph<T>::id x, typename graph<T>::id h_prev,
             typename graph<T>::id c_prev) {
    if (g.shape(x) != shape_t{input_size} || g.shape(h_prev) != shape_t{hidden_size} ||
        g.shape(c_prev) != shape_t{hidden_size})
      throw config_error("lstm_layer: step input shapes " + shape_str(g.shape(x)) + ", " +
                         shape_str(g.shape(h_prev)) + " do not match layer (input " +
                         std::to_string(input_size) + ", hidden " + std::to_string(hidden_size) +
                         ")");
    const auto z = g.concat(x, h_prev);
    const auto i = g.sigmoid(g.affine(z, g.param(w_i), g.param(b_i)));
    const auto f = g.sigmoid(g.affine(z, g.param(w_f), g.param(b_f)));
    const auto o = g.sigmoid(g.affine(z, g.param(w_o), g.param(b_o)));
    const auto cand = g.tanh(g.affine(z, g.param(w_g), g.param(b_g)));
    const auto c = g.add(g.mul(f, c_prev), g.mul(i, cand));
    const auto h = g.mul(o, g.tanh(c));
    return {h, c};
  }

  // Iterates step() from zero state. return_sequence=true yields h_t for
  // every step; false yields only the final hidden state.
  std::vector<typename graph<T>::id> sequence(graph<T>& g,
                                              std::span<const typename graph<T>::id> xs,
                                              bool return_sequence) {
    if (xs.empty()) throw usage_error("lstm_layer: empty sequence");
    auto h = g.constant(tensor<T>(shape_t{hidden_size}));
    auto c = g.constant(tensor<T>(shape_t{hidden_size}));
    std::vector<typename graph<T>::id> out;
    if (return_sequence) out.reserve(xs.size());
    for (auto x : xs) {
      const state s = step(g, x, h, c);
      h = s.h;
      c = s.c;
      if (return_sequence) out.push_back(h);
    }
    if (!return_sequence) out.push_back(h);
    return out;
  }

  void collect_params(const std::string& prefix, std::vector<named_param<T>>& out) {
    out.push_back({prefix + ".w_i", &w_i});
    out.push_back({prefix + ".w_f", &w_f});
    out.push_back({prefix + ".w_o", &w_o});
    out.push_back({prefix + ".w_g", &w_g});
    out.push_back({prefix + ".b_i", &b_i});
    out.push_back({prefix + ".b_f", &b_f});
    out.push_back({prefix + ".b_o", &b_o});
    out.push_back({prefix + ".b_g", &b_g});
  }
};

template <typename T>
struct dense_layer {
  tensor<T> weight;  // [in, out]
  tensor<T> bias;    // [out]
  activation act = activation::linear;

  dense_layer() = default;
  dense_layer(std::size_t in, std::size_t out, activation a)
      : weight(shape_t{in, out}), bias(shape_t{out}), act(a) {
    weight.mark_param();
    bias.mark_param();
  }

  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    detail::glorot_fill(weight, weight.shape[0], weight.shape[1], rng);
    std::fill(bias.values.begin(), bias.values.end(), T(0));
  }

  typename graph<T>::id apply(graph<T>& g, typename graph<T>::id in) {
    auto out = g.affine(in, g.param(weight), g.param(bias));
    switch (act) {
      case activation::relu: return g.relu(out);
      case activation::tanh: return g.tanh(out);
      case activation::linear: return out;
    }
    return out;
  }

  void collect_params(const std::string& prefix, std::vector<named_param<T>>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
  }
};

}  // namespace coopsteer
