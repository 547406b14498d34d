#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "coopsteer/errors.hpp"
#include "coopsteer/layers.hpp"

namespace coopsteer {

struct adam_config {
  double lr = 1e-3;
  double beta1 = 0.900;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are keyed by parameter index
// in the order the model reports them, which is stable for a given
// architecture.
template <typename T>
class adam {
 public:
  adam() = default;
  explicit adam(adam_config cfg) : cfg_(cfg) {}

  const adam_config& config() const { return cfg_; }
  std::uint64_t step_count() const { return t_; }

  // One update over all parameters. Gradients are read from tensor.grad and
  // must be populated for every parameter; NaN gradients abort the step
  // before any parameter is touched.
  void step(const std::vector<named_param<T>>& params) {
    if (m_.empty()) allocate(params);
    if (m_.size() != params.size())
      throw config_error("adam: parameter count changed between steps");
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto& [name, t] = params[p];
      if (t->grad.size() != t->values.size())
        throw usage_error("adam: missing gradient for " + name);
      for (std::size_t i = 0; i < t->grad.size(); ++i)
        if (!std::isfinite(double(t->grad[i])))
          throw numeric_error("adam: non-finite gradient at " + name + "[" + std::to_string(i) +
                              "]");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      tensor<T>& t = *params[p].second;
      auto& m = m_[p];
      auto& v = v_[p];
      for (std::size_t i = 0; i < t.values.size(); ++i) {
        const double g = double(t.grad[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        t.values[i] = T(double(t.values[i]) - cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
      }
    }
  }

  // Checkpoint access: moments are stored at double precision regardless of
  // the parameter scalar type so resumption is exact.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  void restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v,
               std::uint64_t t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  adam_config cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;

  void allocate(const std::vector<named_param<T>>& params) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      m_[p].assign(params[p].second->size(), 0.0);
      v_[p].assign(params[p].second->size(), 0.0);
    }
  }
};

}  // namespace coopsteer
