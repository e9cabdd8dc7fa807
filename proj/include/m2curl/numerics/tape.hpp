#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>

#include "m2curl/numerics/parameter.hpp"
#include "m2curl/numerics/tensor.hpp"

namespace m2curl {

/// Handle to a value recorded on a Tape.
struct Var {
    std::uint32_t id = 0;
};

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite value produced by ") + op);
    }
}

/// Per-forward-pass record of operations for reverse-mode differentiation.
///
/// Leaves come in three flavours: constants, trainable parameters (gradients
/// accumulate into Parameter::grad) and detached parameters (read directly,
/// never differentiated). A tape is single-owner and meant to be discarded
/// after `backward`.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor<T> value) {
        Node n;
        n.owned = std::move(value);
        return push(std::move(n));
    }

    Var param(Parameter<T>& p) {
        Node n;
        n.external = &p.value;
        n.param = &p;
        n.requires_grad = true;
        return push(std::move(n));
    }

    /// Reads the parameter's value without ever routing gradient to it.
    Var detached(const Parameter<T>& p) {
        Node n;
        n.external = &p.value;
        return push(std::move(n));
    }

    Var record(Tensor<T> value, bool requires_grad, BackwardFn fn, const char* op) {
        check_finite(value, op);
        Node n;
        n.owned = std::move(value);
        n.requires_grad = requires_grad;
        if (requires_grad) n.backward = std::move(fn);
        return push(std::move(n));
    }

    const Tensor<T>& value(Var v) const {
        const Node& n = nodes_.at(v.id);
        return n.external ? *n.external : n.owned;
    }

    const Shape& shape(Var v) const { return value(v).shape(); }

    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient slot of a node; zero-initialized on first access.
    Tensor<T>& grad(Var v) {
        Node& n = nodes_.at(v.id);
        if (n.param) return n.param->grad;
        if (n.grad.shape() != value(v).shape()) n.grad = Tensor<T>(value(v).shape());
        return n.grad;
    }

    /// Accumulates d(loss)/d(value) into every reachable trainable parameter.
    void backward(Var loss) {
        if (value(loss).size() != 1) {
            throw ContractError("backward requires a scalar loss, got shape " +
                                shape_str(value(loss).shape()));
        }
        for (auto& n : nodes_) {
            if (!n.param) n.grad = Tensor<T>();
        }
        if (!requires_grad(loss)) return;
        grad(loss)[0] = T(1);
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.requires_grad || n.param || !n.backward) continue;
            if (n.grad.size() == 0) continue;
            n.backward(*this);
        }
    }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> owned;
        const Tensor<T>* external = nullptr;
        Parameter<T>* param = nullptr;
        Tensor<T> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var push(Node n) {
        nodes_.push_back(std::move(n));
        return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    std::deque<Node> nodes_;
};

}  // namespace m2curl
