#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coopsteer/layers.hpp"
#include "coopsteer/util.hpp"

namespace coopsteer {

enum class arch_kind : std::uint8_t { coop, baselineA, baselineD, baselineE };

inline const char* arch_name(arch_kind a) {
  switch (a) {
    case arch_kind::coop: return "coop";
    case arch_kind::baselineA: return "baselineA";
    case arch_kind::baselineD: return "baselineD";
    case arch_kind::baselineE: return "baselineE";
  }
  return "?";
}

inline arch_kind arch_from_name(const std::string& s) {
  if (s == "coop") return arch_kind::coop;
  if (s == "baselineA") return arch_kind::baselineA;
  if (s == "baselineD") return arch_kind::baselineD;
  if (s == "baselineE") return arch_kind::baselineE;
  throw config_error("unknown architecture '" + s + "'");
}

struct conv_spec {
  std::size_t kernel;
  std::size_t filters;
  std::size_t stride_h;
  std::size_t stride_w;
};

// Layer table defaults: 5x5 convolutions at 24/32/48/64/128 filters with
// per-layer strides, three 64-unit LSTMs, then a 100/50/10/1 head.
struct layer_table {
  std::vector<conv_spec> conv{{5, 24, 5, 4}, {5, 32, 3, 2}, {5, 48, 5, 4}, {5, 64, 1, 1},
                              {5, 128, 1, 2}};
  std::size_t lstm_units = 64;
  std::size_t lstm_depth = 3;
  std::vector<std::size_t> fc{100, 50, 10, 1};
};

struct model_config {
  arch_kind arch = arch_kind::coop;
  std::size_t x = 8;           // frames per vehicle; a sample holds 2x
  std::size_t input_h = 480;
  std::size_t input_w = 640;
  std::size_t channels = 3;
  std::size_t pair_gap = 1;    // frame gap for the two-frame baselines
  layer_table table;

  std::size_t frames_per_sample() const {
    switch (arch) {
      case arch_kind::coop: return 2 * x;
      case arch_kind::baselineA: return 1;
      case arch_kind::baselineD:
      case arch_kind::baselineE: return 2;
    }
    return 0;
  }

  void validate() const {
    if (x < 1) throw config_error("model: x must be >= 1");
    if (channels != 3) throw config_error("model: expected 3-channel input");
    if (table.conv.empty() || table.fc.empty()) throw config_error("model: empty layer table");
    if (table.fc.back() != 1) throw config_error("model: final dense layer must emit 1 value");
    if ((arch == arch_kind::baselineD || arch == arch_kind::baselineE) && pair_gap >= x)
      throw config_error("model: two-frame baselines need pair_gap < x (gap " +
                         std::to_string(pair_gap) + ", x " + std::to_string(x) + ")");
  }
};

// Walks the conv stack shape chain under same padding. Throws if any layer
// is ill-formed, which makes model construction the build-rejecting check.
inline std::size_t conv_feature_length(const layer_table& table, std::size_t h, std::size_t w) {
  std::size_t ch = 0;
  for (const auto& spec : table.conv) {
    const auto gy = same_pad_axis(h, spec.kernel, spec.stride_h);
    const auto gx = same_pad_axis(w, spec.kernel, spec.stride_w);
    h = gy.out;
    w = gx.out;
    ch = spec.filters;
  }
  return h * w * ch;
}

// The trainable prediction function: Table I conv stack shared across all
// frames of a sample, optional LSTM stack, dense head emitting one steering
// angle in radians.
template <typename T>
struct steering_model {
  using node_id = typename graph<T>::id;

  model_config cfg;
  std::vector<conv2d_layer<T>> conv;
  std::vector<lstm_layer<T>> lstm;  // empty for the CNN-only baselines
  std::vector<dense_layer<T>> fc;
  std::size_t feature_len = 0;

  steering_model() = default;

  static steering_model build(const model_config& cfg, std::uint64_t seed) {
    cfg.validate();
    steering_model m;
    m.cfg = cfg;
    m.feature_len = conv_feature_length(cfg.table, cfg.input_h, cfg.input_w);

    std::size_t cin = cfg.arch == arch_kind::baselineE ? 2 * cfg.channels : cfg.channels;
    for (std::size_t i = 0; i < cfg.table.conv.size(); ++i) {
      const auto& s = cfg.table.conv[i];
      m.conv.emplace_back(s.kernel, s.kernel, cin, s.filters, s.stride_h, s.stride_w,
                          activation::relu);
      m.conv.back().init_params(derive_seed(seed, 1, i));
      cin = s.filters;
    }

    if (cfg.arch == arch_kind::coop) {
      std::size_t in = m.feature_len;
      for (std::size_t i = 0; i < cfg.table.lstm_depth; ++i) {
        m.lstm.emplace_back(in, cfg.table.lstm_units);
        m.lstm.back().init_params(derive_seed(seed, 2, i));
        in = cfg.table.lstm_units;
      }
    }

    std::size_t in = cfg.arch == arch_kind::coop ? cfg.table.lstm_units : m.feature_len;
    for (std::size_t i = 0; i < cfg.table.fc.size(); ++i) {
      const bool last = i + 1 == cfg.table.fc.size();
      m.fc.emplace_back(in, cfg.table.fc[i], last ? activation::linear : activation::relu);
      m.fc.back().init_params(derive_seed(seed, 3, i));
      in = cfg.table.fc[i];
    }
    return m;
  }

  // Conv stack applied to one frame, flattened to a feature vector.
  node_id frame_features(graph<T>& g, node_id frame) {
    node_id cur = frame;
    for (auto& layer : conv) cur = layer.apply(g, cur);
    return g.reshape(cur, {numel(g.shape(cur))});
  }

  node_id head(graph<T>& g, node_id in) {
    node_id cur = in;
    for (auto& layer : fc) cur = layer.apply(g, cur);
    return cur;
  }

  // Cooperative model: 2x frames (ego chronological, then lead
  // chronological) through the shared conv stack, the stacked LSTMs, and
  // the dense head. Layers 1..depth-1 emit full sequences; the last emits
  // only its final hidden state.
  node_id forward_coop(graph<T>& g, std::span<const tensor<T>> frames) {
    if (cfg.arch != arch_kind::coop) throw usage_error("forward_coop on non-coop model");
    if (frames.size() != 2 * cfg.x)
      throw config_error("forward_coop: expected " + std::to_string(2 * cfg.x) +
                         " frames, got " + std::to_string(frames.size()));
    std::vector<node_id> feats;
    feats.reserve(frames.size());
    for (const auto& f : frames) feats.push_back(frame_features(g, g.input(f)));
    for (std::size_t l = 0; l + 1 < lstm.size(); ++l)
      feats = lstm[l].sequence(g, feats, /*return_sequence=*/true);
    auto last = lstm.back().sequence(g, feats, /*return_sequence=*/false);
    return head(g, last.front());
  }

  // Model A: single current frame through conv + head, no recurrence.
  node_id forward_single(graph<T>& g, const tensor<T>& frame) {
    if (cfg.arch == arch_kind::coop) throw usage_error("forward_single on coop model");
    check_frame(frame, cfg.arch == arch_kind::baselineE ? 2 * cfg.channels : cfg.channels);
    return head(g, frame_features(g, g.input(frame)));
  }

  // Model D: difference image of two time-steps, then the Model A network.
  // The difference is data, not graph state: no gradient flows to pixels.
  node_id forward_diff(graph<T>& g, const tensor<T>& frame_a, const tensor<T>& frame_b) {
    if (cfg.arch != arch_kind::baselineD) throw usage_error("forward_diff on wrong architecture");
    check_pair(frame_a, frame_b);
    tensor<T> diff(frame_a.shape);
    for (std::size_t i = 0; i < diff.size(); ++i)
      diff.values[i] = frame_b.values[i] - frame_a.values[i];
    return head(g, frame_features(g, g.constant(std::move(diff))));
  }

  // Model E: channel-wise concatenation [H,W,6] into a Cin=6 conv stack.
  node_id forward_concat(graph<T>& g, const tensor<T>& frame_a, const tensor<T>& frame_b) {
    if (cfg.arch != arch_kind::baselineE)
      throw usage_error("forward_concat on wrong architecture");
    check_pair(frame_a, frame_b);
    const std::size_t h = frame_a.shape[0], w = frame_a.shape[1], c = frame_a.shape[2];
    tensor<T> stacked(shape_t{h, w, 2 * c});
    for (std::size_t p = 0; p < h * w; ++p) {
      for (std::size_t k = 0; k < c; ++k) {
        stacked.values[p * 2 * c + k] = frame_a.values[p * c + k];
        stacked.values[p * 2 * c + c + k] = frame_b.values[p * c + k];
      }
    }
    return head(g, frame_features(g, g.constant(std::move(stacked))));
  }

  // Arch dispatch over a sample's frame list (see data::assemble_input for
  // how the list is derived from a window).
  node_id forward(graph<T>& g, std::span<const tensor<T>> frames) {
    switch (cfg.arch) {
      case arch_kind::coop: return forward_coop(g, frames);
      case arch_kind::baselineA:
        expect_count(frames.size(), 1);
        return forward_single(g, frames[0]);
      case arch_kind::baselineD:
        expect_count(frames.size(), 2);
        return forward_diff(g, frames[0], frames[1]);
      case arch_kind::baselineE:
        expect_count(frames.size(), 2);
        return forward_concat(g, frames[0], frames[1]);
    }
    throw config_error("forward: unknown architecture");
  }

  std::vector<named_param<T>> params() {
    std::vector<named_param<T>> out;
    for (std::size_t i = 0; i < conv.size(); ++i)
      conv[i].collect_params("conv" + std::to_string(i + 1), out);
    for (std::size_t i = 0; i < lstm.size(); ++i)
      lstm[i].collect_params("lstm" + std::to_string(i + 1), out);
    for (std::size_t i = 0; i < fc.size(); ++i)
      fc[i].collect_params("fc" + std::to_string(i + 1), out);
    return out;
  }

  std::size_t count_params() {
    std::size_t n = 0;
    for (const auto& [name, t] : params()) n += t->size();
    return n;
  }

  // Content hash over parameter values, in declaration order.
  std::uint64_t param_checksum() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : params())
      h = fnv1a(t->values.data(), t->values.size() * sizeof(T), h);
    return h;
  }

 private:
  static void expect_count(std::size_t got, std::size_t want) {
    if (got != want)
      throw config_error("forward: expected " + std::to_string(want) + " frames, got " +
                         std::to_string(got));
  }

  void check_frame(const tensor<T>& f, std::size_t channels) const {
    if (f.shape.size() != 3 || f.shape[0] != cfg.input_h || f.shape[1] != cfg.input_w ||
        f.shape[2] != channels)
      throw config_error("forward: frame shape " + shape_str(f.shape) + " does not match model" +
                         " input " + std::to_string(cfg.input_h) + "x" +
                         std::to_string(cfg.input_w) + "x" + std::to_string(channels));
  }

  void check_pair(const tensor<T>& a, const tensor<T>& b) const {
    if (a.shape != b.shape)
      throw config_error("forward: frame pair shapes differ, " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    check_frame(a, cfg.channels);
  }
};

}  // namespace coopsteer
