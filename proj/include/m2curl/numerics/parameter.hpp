#pragma once

#include <random>
#include <string>
#include <vector>

#include "m2curl/numerics/tensor.hpp"

namespace m2curl {

/// Trainable tensor with a gradient slot of identical shape.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
using ParamRefs = std::vector<Parameter<T>*>;

template <typename T>
using ConstParamRefs = std::vector<const Parameter<T>*>;

template <typename T>
void zero_grads(const ParamRefs<T>& params) {
    for (auto* p : params) p->zero_grad();
}

/// Copies values between two parameter lists of mirrored shapes.
template <typename T>
void copy_values(const ConstParamRefs<T>& from, const ParamRefs<T>& to) {
    if (from.size() != to.size()) {
        throw ContractError("copy_values: parameter count mismatch (" + std::to_string(from.size()) +
                            " vs " + std::to_string(to.size()) + ")");
    }
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (from[i]->value.shape() != to[i]->value.shape()) {
            throw ContractError("copy_values: shape mismatch for " + to[i]->name + ": " +
                                shape_str(from[i]->value.shape()) + " vs " +
                                shape_str(to[i]->value.shape()));
        }
        to[i]->value = from[i]->value;
    }
}

template <typename T>
ConstParamRefs<T> as_const(const ParamRefs<T>& refs) {
    return ConstParamRefs<T>(refs.begin(), refs.end());
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization, the usual default for dense and conv layers.
template <typename T, typename Rng>
Tensor<T> uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor<T> t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
}

/// He-uniform, bound sqrt(6 / fan_in): keeps activation scale through ReLU stacks.
template <typename T, typename Rng>
Tensor<T> he_uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor<T> t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
}

}  // namespace m2curl
