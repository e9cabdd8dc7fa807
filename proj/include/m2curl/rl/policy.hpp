#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "m2curl/numerics/layers.hpp"
#include "m2curl/sim/environment.hpp"

namespace m2curl::rl {

inline constexpr std::size_t kActionDim = 2;
inline const double kLog2Pi = std::log(2.0 * std::numbers::pi);

/// log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)), stable for large |u|.
template <typename T>
Var log_one_minus_tanh_sq(Tape<T>& tape, Var u) {
    Var sp = ops::softplus(tape, ops::scale(tape, u, T(-2)));
    return ops::scale(tape, ops::add_scalar(tape, ops::scale(tape, ops::add(tape, u, sp), T(-1)),
                                            static_cast<T>(std::numbers::ln2)),
                      T(2));
}

/// Row-wise diagonal Gaussian log density given standardized residuals z = (u - mean) / std:
/// sum_j (-z_j^2 / 2 - log_std_j) - d/2 log(2 pi). Shape [B, 1].
template <typename T>
Var gaussian_log_prob(Tape<T>& tape, Var z, Var log_std) {
    const std::size_t d = tape.shape(z).at(1);
    Var terms = ops::sub(tape, ops::scale(tape, ops::square(tape, z), T(-0.5)), log_std);
    return ops::add_scalar(tape, ops::sum_cols(tape, terms), static_cast<T>(-0.5 * d * kLog2Pi));
}

template <typename T>
Tensor<T> standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    Tensor<T> eps(Shape{rows, cols});
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : eps.data()) v = static_cast<T>(n(rng));
    return eps;
}

/// Tanh-squashed Gaussian policy. The trunk outputs [mean | raw log_std];
/// log_std = lo + (hi - lo) (tanh(raw) + 1) / 2.
template <typename T>
struct SquashedGaussianActor {
    Mlp<T> trunk;
    double log_std_min = -5.0;
    double log_std_max = 2.0;

    SquashedGaussianActor() = default;

    template <typename Rng>
    SquashedGaussianActor(const std::string& name, std::size_t features, std::size_t hidden, double lo, double hi,
                          Rng& rng)
        : trunk(name, {features, hidden, hidden, 2 * kActionDim}, rng), log_std_min(lo), log_std_max(hi) {}

    struct Heads {
        Var mean;
        Var log_std;
    };

    Heads heads(Tape<T>& tape, Var features, Binding binding) {
        Var out = trunk(tape, features, binding);
        Var mean = ops::slice_cols(tape, out, 0, kActionDim);
        Var raw = ops::slice_cols(tape, out, kActionDim, 2 * kActionDim);
        const T half_range = static_cast<T>(0.5 * (log_std_max - log_std_min));
        Var log_std = ops::add_scalar(tape, ops::scale(tape, ops::add_scalar(tape, ops::tanh(tape, raw), T(1)), half_range),
                                      static_cast<T>(log_std_min));
        return {mean, log_std};
    }

    struct Sample {
        Var action;    // tanh(u), [B, 2]
        Var log_prob;  // [B, 1], includes the tanh Jacobian
        Var pre_tanh;  // u
    };

    /// Reparameterized sample u = mean + exp(log_std) * eps.
    Sample sample(Tape<T>& tape, Var features, const Tensor<T>& eps, Binding binding) {
        Heads h = heads(tape, features, binding);
        Var e = tape.constant(eps);
        Var u = ops::add(tape, h.mean, ops::mul(tape, ops::exp(tape, h.log_std), e));
        Var logp = gaussian_log_prob(tape, e, h.log_std);
        logp = ops::sub(tape, logp, ops::sum_cols(tape, log_one_minus_tanh_sq(tape, u)));
        return {ops::tanh(tape, u), logp, u};
    }

    Var deterministic(Tape<T>& tape, Var features, Binding binding) {
        return ops::tanh(tape, heads(tape, features, binding).mean);
    }

    void collect(ParamRefs<T>& out) { trunk.collect(out); }
    void collect(ConstParamRefs<T>& out) const { trunk.collect(out); }
};

/// Q(s, a) on [features | action].
template <typename T>
struct QNetwork {
    Mlp<T> net;

    QNetwork() = default;

    template <typename Rng>
    QNetwork(const std::string& name, std::size_t features, std::size_t hidden, Rng& rng)
        : net(name, {features + kActionDim, hidden, hidden, 1}, rng) {}

    Var operator()(Tape<T>& tape, Var features, Var action, Binding binding) {
        return net(tape, ops::concat_cols(tape, {features, action}), binding);
    }

    void collect(ParamRefs<T>& out) { net.collect(out); }
    void collect(ConstParamRefs<T>& out) const { net.collect(out); }
};

/// Unsquashed Gaussian with a state-independent log_std parameter (PPO).
template <typename T>
struct GaussianActor {
    Mlp<T> mean_net;
    Parameter<T> log_std;

    GaussianActor() = default;

    template <typename Rng>
    GaussianActor(const std::string& name, std::size_t features, std::size_t hidden, double init_log_std, Rng& rng)
        : mean_net(name, {features, hidden, hidden, kActionDim}, rng),
          log_std(name + ".log_std", Tensor<T>(Shape{kActionDim}, static_cast<T>(init_log_std))) {}

    struct Eval {
        Var mean;
        Var log_std;   // [B, 2]
        Var log_prob;  // [B, 1] of the given actions
        Var entropy;   // [B, 1]
    };

    /// Log density of `actions` ([B, 2], unclipped) under the current policy.
    Eval evaluate(Tape<T>& tape, Var features, const Tensor<T>& actions, Binding binding) {
        Var mean = mean_net(tape, features, binding);
        const std::size_t B = tape.shape(mean).at(0);
        Var ls = ops::broadcast_rows(tape, bind(tape, log_std, binding), B);
        Var z = ops::mul(tape, ops::sub(tape, tape.constant(actions), mean), ops::exp(tape, ops::scale(tape, ls, T(-1))));
        Var logp = gaussian_log_prob(tape, z, ls);
        Var ent = ops::add_scalar(tape, ops::sum_cols(tape, ls), static_cast<T>(0.5 * kActionDim * (1.0 + kLog2Pi)));
        return {mean, ls, logp, ent};
    }

    void collect(ParamRefs<T>& out) {
        mean_net.collect(out);
        out.push_back(&log_std);
    }
    void collect(ConstParamRefs<T>& out) const {
        mean_net.collect(out);
        out.push_back(&log_std);
    }
};

/// target <- polyak * target + (1 - polyak) * online, clamped to the interval
/// between the two so rounding never overshoots.
template <typename T>
void polyak_update(const ConstParamRefs<T>& online, const ParamRefs<T>& target, double polyak) {
    if (online.size() != target.size()) throw ContractError("polyak_update: parameter count mismatch");
    const T a = static_cast<T>(polyak), b = static_cast<T>(1.0 - polyak);
    for (std::size_t i = 0; i < online.size(); ++i) {
        if (online[i]->value.shape() != target[i]->value.shape()) {
            throw ContractError("polyak_update: shape mismatch for " + target[i]->name);
        }
        T* t = target[i]->value.raw();
        const T* o = online[i]->value.raw();
        for (std::size_t k = 0; k < target[i]->value.size(); ++k) {
            t[k] = std::clamp(a * t[k] + b * o[k], std::min(t[k], o[k]), std::max(t[k], o[k]));
        }
    }
}

inline sim::Action clip_action(double x, double y) {
    return {std::clamp(x, -1.0, 1.0), std::clamp(y, -1.0, 1.0)};
}

}  // namespace m2curl::rl
