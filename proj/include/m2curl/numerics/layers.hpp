#pragma once

#include <string>
#include <vector>

#include "m2curl/numerics/ops.hpp"
#include "m2curl/numerics/parameter.hpp"

namespace m2curl {

/// How a layer's parameters enter a tape: as gradient-receiving leaves or as
/// read-only constants (momentum encoders, target networks, frozen copies).
enum class Binding { trainable, detached };

template <typename T>
Var bind(Tape<T>& tape, Parameter<T>& p, Binding binding) {
    return binding == Binding::trainable ? tape.param(p) : tape.detached(p);
}

template <typename T>
struct Linear {
    Parameter<T> weight;
    Parameter<T> bias;

    Linear() = default;

    template <typename Rng>
    Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
        : weight(name + ".weight", uniform_init<T>(Shape{in, out}, in, rng)),
          bias(name + ".bias", uniform_init<T>(Shape{out}, in, rng)) {}

    std::size_t in_features() const { return weight.value.dim(0); }
    std::size_t out_features() const { return weight.value.dim(1); }

    Var operator()(Tape<T>& tape, Var x, Binding binding) {
        return ops::affine(tape, x, bind(tape, weight, binding), bind(tape, bias, binding));
    }

    void collect(ParamRefs<T>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
    void collect(ConstParamRefs<T>& out) const {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

template <typename T>
struct Conv2d {
    Parameter<T> kernel;
    Parameter<T> bias;
    std::size_t stride = 1;

    Conv2d() = default;

    template <typename Rng>
    Conv2d(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t k,
           std::size_t stride_, Rng& rng)
        : kernel(name + ".kernel", he_uniform_init<T>(Shape{out_ch, in_ch, k, k}, in_ch * k * k, rng)),
          bias(name + ".bias", uniform_init<T>(Shape{out_ch}, in_ch * k * k, rng)),
          stride(stride_) {}

    Var operator()(Tape<T>& tape, Var x, Binding binding) {
        return ops::conv2d(tape, x, bind(tape, kernel, binding), bind(tape, bias, binding), stride);
    }

    void collect(ParamRefs<T>& out) {
        out.push_back(&kernel);
        out.push_back(&bias);
    }
    void collect(ConstParamRefs<T>& out) const {
        out.push_back(&kernel);
        out.push_back(&bias);
    }
};

/// Dense layers with ReLU between them (none after the last).
template <typename T>
struct Mlp {
    std::vector<Linear<T>> layers;

    Mlp() = default;

    template <typename Rng>
    Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Rng& rng) {
        if (sizes.size() < 2) throw ConfigError("Mlp needs at least input and output sizes");
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
            layers.emplace_back(name + ".l" + std::to_string(i), sizes[i], sizes[i + 1], rng);
        }
    }

    Var operator()(Tape<T>& tape, Var x, Binding binding) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            x = layers[i](tape, x, binding);
            if (i + 1 < layers.size()) x = ops::relu(tape, x);
        }
        return x;
    }

    void collect(ParamRefs<T>& out) {
        for (auto& l : layers) l.collect(out);
    }
    void collect(ConstParamRefs<T>& out) const {
        for (const auto& l : layers) l.collect(out);
    }
};

template <typename T, typename M>
ParamRefs<T> params_of(M& module) {
    ParamRefs<T> out;
    module.collect(out);
    return out;
}

template <typename T, typename M>
ConstParamRefs<T> const_params_of(const M& module) {
    ConstParamRefs<T> out;
    module.collect(out);
    return out;
}

}  // namespace m2curl
