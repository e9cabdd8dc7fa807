#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "m2curl/numerics/parameter.hpp"

namespace m2curl {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    Tensor<T> first_moment;
    Tensor<T> second_moment;
    std::uint64_t step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;
    AdamState(const Shape& shape, const AdamConfig& cfg)
        : first_moment(shape), second_moment(shape), learning_rate(cfg.learning_rate),
          beta1(cfg.beta1), beta2(cfg.beta2), epsilon(cfg.epsilon) {}
};

/// One bias-corrected Adam update of `param` from its current gradient.
template <typename T>
void adam_step(Parameter<T>& param, AdamState<T>& state) {
    if (state.first_moment.shape() != param.value.shape()) {
        throw ContractError("adam_step: state shape " + shape_str(state.first_moment.shape()) +
                            " does not match parameter " + param.name);
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const T b1 = static_cast<T>(state.beta1);
    const T b2 = static_cast<T>(state.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
    const T c2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
    const T lr = static_cast<T>(state.learning_rate);
    const T eps = static_cast<T>(state.epsilon);
    T* m = state.first_moment.raw();
    T* v = state.second_moment.raw();
    T* p = param.value.raw();
    const T* g = param.grad.raw();
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = m[i] / c1;
        const T vhat = v[i] / c2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

/// Adam over a fixed list of parameters.
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(ParamRefs<T> params, const AdamConfig& cfg) : params_(std::move(params)) {
        states_.reserve(params_.size());
        for (auto* p : params_) states_.emplace_back(p->value.shape(), cfg);
    }

    void zero_grad() { zero_grads(params_); }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], states_[i]);
    }

    const ParamRefs<T>& params() const { return params_; }
    const std::vector<AdamState<T>>& states() const { return states_; }

private:
    ParamRefs<T> params_;
    std::vector<AdamState<T>> states_;
};

}  // namespace m2curl
