#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "foldkit/tensor.hpp"

namespace foldkit::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    Tensor<T> m;  // first moment
    Tensor<T> v;  // second moment
};

// One Adam update with bias correction. `step` is 1-based.
template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& state,
               int64_t step, const AdamConfig& cfg) {
    require_same_shape(param, grad, "adam_step");
    if (state.m.empty()) state.m = Tensor<T>(param.shape());
    if (state.v.empty()) state.v = Tensor<T>(param.shape());
    require_same_shape(param, state.m, "adam_step(state)");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (int64_t i = 0; i < param.numel(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double m = cfg.beta1 * static_cast<double>(state.m[i]) + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * static_cast<double>(state.v[i]) + (1.0 - cfg.beta2) * g * g;
        state.m[i] = static_cast<T>(m);
        state.v[i] = static_cast<T>(v);
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        param[i] = static_cast<T>(static_cast<double>(param[i]) -
                                  cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
}

// Optimizer over a fixed list of parameter tensors.
template <typename T>
class AdamOptimizer {
  public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(std::vector<Tensor<T>*> params, std::vector<const Tensor<T>*> grads) {
        if (params.size() != grads.size())
            throw ShapeError("adam: parameter/gradient count mismatch");
        if (states_.empty()) states_.resize(params.size());
        ++step_;
        for (size_t i = 0; i < params.size(); ++i)
            adam_step(*params[i], *grads[i], states_[i], step_, cfg_);
    }

    const AdamConfig& config() const { return cfg_; }
    int64_t step_count() const { return step_; }
    std::vector<AdamState<T>>& states() { return states_; }
    const std::vector<AdamState<T>>& states() const { return states_; }
    void restore(std::vector<AdamState<T>> states, int64_t step) {
        states_ = std::move(states);
        step_ = step;
    }

  private:
    AdamConfig cfg_;
    int64_t step_ = 0;
    std::vector<AdamState<T>> states_;
};

}  // namespace foldkit::nn
