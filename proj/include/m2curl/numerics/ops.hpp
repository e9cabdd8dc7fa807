#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "m2curl/numerics/tape.hpp"

namespace m2curl::ops {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
MapMat<T> mat(Tensor<T>& t, std::size_t rows, std::size_t cols) {
    return MapMat<T>(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
CMapMat<T> mat(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
    return CMapMat<T>(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                             shape_str(b));
    }
}

inline void require_rank(const Shape& s, std::size_t rank, const char* op) {
    if (s.size() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got shape " + shape_str(s));
    }
}

/// Elementwise unary op with derivative expressed in terms of input and output.
template <typename T, typename F, typename D>
Var unary(Tape<T>& tape, Var x, F f, D dfdx, const char* name) {
    const Tensor<T>& xv = tape.value(x);
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    const bool rg = tape.requires_grad(x);
    std::uint32_t out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), rg,
        [x, out_id, dfdx](Tape<T>& t) {
            const Tensor<T>& xv = t.value(x);
            const Tensor<T>& yv = t.value(Var{out_id});
            const Tensor<T>& g = t.grad(Var{out_id});
            Tensor<T>& gx = t.grad(x);
            for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * dfdx(xv[i], yv[i]);
        },
        name);
}

}  // namespace detail

/// y = x W + b. x is [B, in] (or [in]), W is [in, out], b is [out].
template <typename T>
Var affine(Tape<T>& tape, Var x, Var w, Var b) {
    const Tensor<T>& xv = tape.value(x);
    const Tensor<T>& wv = tape.value(w);
    const Tensor<T>& bv = tape.value(b);
    if (wv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != wv.dim(1) || xv.rank() < 1 ||
        xv.rank() > 2 || xv.shape().back() != wv.dim(0)) {
        throw DimensionError("affine: input " + shape_str(xv.shape()) + " incompatible with weight " +
                             shape_str(wv.shape()) + " and bias " + shape_str(bv.shape()));
    }
    const std::size_t in = wv.dim(0), outd = wv.dim(1);
    const std::size_t batch = xv.rank() == 2 ? xv.dim(0) : 1;
    Shape out_shape = xv.rank() == 2 ? Shape{batch, outd} : Shape{outd};
    Tensor<T> out(out_shape);
    auto y = detail::mat(out, batch, outd);
    y.noalias() = detail::mat(xv, batch, in) * detail::mat(wv, in, outd);
    y.rowwise() += detail::mat(bv, 1, outd).row(0);
    const bool rg = tape.requires_grad(x) || tape.requires_grad(w) || tape.requires_grad(b);
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), rg,
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            auto gm = detail::mat(g, batch, outd);
            if (t.requires_grad(w)) {
                detail::mat(t.grad(w), in, outd).noalias() +=
                    detail::mat(t.value(x), batch, in).transpose() * gm;
            }
            if (t.requires_grad(b)) {
                detail::mat(t.grad(b), 1, outd).row(0) += gm.colwise().sum();
            }
            if (t.requires_grad(x)) {
                detail::mat(t.grad(x), batch, in).noalias() +=
                    gm * detail::mat(t.value(w), in, outd).transpose();
            }
        },
        "affine");
}

/// Valid (unpadded) cross-correlation. x is [B, C, H, W] (or [C, H, W]),
/// kernel is [O, C, K, K], bias is [O].
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var kernel, Var bias, std::size_t stride) {
    const Tensor<T>& xv = tape.value(x);
    const Tensor<T>& kv = tape.value(kernel);
    const Tensor<T>& bv = tape.value(bias);
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    const bool batched = xv.rank() == 4;
    if ((xv.rank() != 3 && xv.rank() != 4) || kv.rank() != 4 || kv.dim(2) != kv.dim(3) ||
        bv.rank() != 1 || bv.dim(0) != kv.dim(0)) {
        throw DimensionError("conv2d: input " + shape_str(xv.shape()) + " incompatible with kernel " +
                             shape_str(kv.shape()) + " and bias " + shape_str(bv.shape()));
    }
    const std::size_t B = batched ? xv.dim(0) : 1;
    const std::size_t C = xv.dim(batched ? 1 : 0);
    const std::size_t H = xv.dim(batched ? 2 : 1);
    const std::size_t W = xv.dim(batched ? 3 : 2);
    const std::size_t O = kv.dim(0), K = kv.dim(2);
    if (kv.dim(1) != C) {
        throw DimensionError("conv2d: kernel channels " + shape_str(kv.shape()) +
                             " do not match input " + shape_str(xv.shape()));
    }
    if (K > H || K > W) {
        throw DimensionError("conv2d: kernel " + shape_str(kv.shape()) + " larger than input " +
                             shape_str(xv.shape()));
    }
    const std::size_t OH = (H - K) / stride + 1, OW = (W - K) / stride + 1;
    const std::size_t P = OH * OW, CKK = C * K * K, N = B * P;

    // col[(c,ki,kj), (b,oy,ox)]
    auto col = std::make_shared<Tensor<T>>(Shape{CKK, N});
    {
        T* cp = col->raw();
        const T* xp = xv.raw();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ki = 0; ki < K; ++ki)
                for (std::size_t kj = 0; kj < K; ++kj) {
                    T* row = cp + ((c * K + ki) * K + kj) * N;
                    for (std::size_t b = 0; b < B; ++b) {
                        const T* plane = xp + (b * C + c) * H * W;
                        T* dst = row + b * P;
                        for (std::size_t oy = 0; oy < OH; ++oy) {
                            const T* src = plane + (oy * stride + ki) * W + kj;
                            for (std::size_t ox = 0; ox < OW; ++ox) dst[oy * OW + ox] = src[ox * stride];
                        }
                    }
                }
    }
    Tensor<T> prod(Shape{O, N});
    detail::mat(prod, O, N).noalias() = detail::mat(kv, O, CKK) * detail::mat(*col, CKK, N);
    Shape out_shape = batched ? Shape{B, O, OH, OW} : Shape{O, OH, OW};
    Tensor<T> out(out_shape);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < O; ++o) {
            const T* src = prod.raw() + o * N + b * P;
            T* dst = out.raw() + (b * O + o) * P;
            const T bo = bv[o];
            for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + bo;
        }
    const bool rg = tape.requires_grad(x) || tape.requires_grad(kernel) || tape.requires_grad(bias);
    if (!rg) col.reset();
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), rg,
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            Tensor<T> gm(Shape{O, N});
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t o = 0; o < O; ++o) {
                    const T* src = g.raw() + (b * O + o) * P;
                    std::copy(src, src + P, gm.raw() + o * N + b * P);
                }
            auto gmat = detail::mat(gm, O, N);
            if (t.requires_grad(kernel)) {
                detail::mat(t.grad(kernel), O, CKK).noalias() +=
                    gmat * detail::mat(*col, CKK, N).transpose();
            }
            if (t.requires_grad(bias)) {
                detail::mat(t.grad(bias), 1, O).row(0) += gmat.rowwise().sum().transpose();
            }
            if (t.requires_grad(x)) {
                Tensor<T> dcol(Shape{CKK, N});
                detail::mat(dcol, CKK, N).noalias() =
                    detail::mat(t.value(kernel), O, CKK).transpose() * gmat;
                T* gx = t.grad(x).raw();
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ki = 0; ki < K; ++ki)
                        for (std::size_t kj = 0; kj < K; ++kj) {
                            const T* row = dcol.raw() + ((c * K + ki) * K + kj) * N;
                            for (std::size_t b = 0; b < B; ++b) {
                                T* plane = gx + (b * C + c) * H * W;
                                const T* src = row + b * P;
                                for (std::size_t oy = 0; oy < OH; ++oy) {
                                    T* dst = plane + (oy * stride + ki) * W + kj;
                                    for (std::size_t ox = 0; ox < OW; ++ox)
                                        dst[ox * stride] += src[oy * OW + ox];
                                }
                            }
                        }
            }
        },
        "conv2d");
}

/// max(0, x); the subgradient at 0 is 0.
template <typename T>
Var relu(Tape<T>& tape, Var x) {
    return detail::unary(
        tape, x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); }, "relu");
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
    return detail::unary(
        tape, x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; }, "tanh");
}

template <typename T>
Var exp(Tape<T>& tape, Var x) {
    return detail::unary(
        tape, x, [](T v) { return std::exp(v); }, [](T, T y) { return y; }, "exp");
}

template <typename T>
Var log(Tape<T>& tape, Var x) {
    return detail::unary(
        tape, x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; }, "log");
}

template <typename T>
Var square(Tape<T>& tape, Var x) {
    return detail::unary(
        tape, x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; }, "square");
}

/// log(1 + exp(x)), evaluated without overflow.
template <typename T>
Var softplus(Tape<T>& tape, Var x) {
    return detail::unary(
        tape, x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
        [](T v, T) { return T(1) / (T(1) + std::exp(-v)); }, "softplus");
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor) {
    return detail::unary(
        tape, x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; }, "scale");
}

template <typename T>
Var add_scalar(Tape<T>& tape, Var x, T c) {
    return detail::unary(
        tape, x, [c](T v) { return v + c; }, [](T, T) { return T(1); }, "add_scalar");
}

/// Clamp with zero gradient outside [lo, hi].
template <typename T>
Var clamp(Tape<T>& tape, Var x, T lo, T hi) {
    return detail::unary(
        tape, x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
        [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); }, "clamp");
}

namespace detail {

template <typename T, typename F, typename DA, typename DB>
Var binary(Tape<T>& tape, Var a, Var b, F f, DA da, DB db, const char* name) {
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    require_same_shape(av.shape(), bv.shape(), name);
    Tensor<T> out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[i]);
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), rg,
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            const Tensor<T>& av = t.value(a);
            const Tensor<T>& bv = t.value(b);
            if (t.requires_grad(a)) {
                Tensor<T>& ga = t.grad(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(av[i], bv[i]);
            }
            if (t.requires_grad(b)) {
                Tensor<T>& gb = t.grad(b);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(av[i], bv[i]);
            }
        },
        name);
}

}  // namespace detail

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
    return detail::binary(
        tape, a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
        [](T, T) { return T(1); }, "add");
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
    return detail::binary(
        tape, a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
        [](T, T) { return T(-1); }, "sub");
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
    return detail::binary(
        tape, a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
        [](T x, T) { return x; }, "mul");
}

/// Elementwise minimum; ties route the gradient to the first operand.
template <typename T>
Var minimum(Tape<T>& tape, Var a, Var b) {
    return detail::binary(
        tape, a, b, [](T x, T y) { return x <= y ? x : y; },
        [](T x, T y) { return x <= y ? T(1) : T(0); }, [](T x, T y) { return x <= y ? T(0) : T(1); },
        "minimum");
}

/// Sum of all entries, shape [1].
template <typename T>
Var sum(Tape<T>& tape, Var x) {
    const Tensor<T>& xv = tape.value(x);
    T s = T(0);
    for (T v : xv.data()) s += v;
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        Tensor<T>::scalar(s), tape.requires_grad(x),
        [=](Tape<T>& t) {
            const T g = t.grad(Var{out_id})[0];
            for (auto& v : t.grad(x).data()) v += g;
        },
        "sum");
}

template <typename T>
Var mean(Tape<T>& tape, Var x) {
    const std::size_t n = tape.value(x).size();
    if (n == 0) throw DimensionError("mean of empty tensor");
    return scale(tape, sum(tape, x), T(1) / static_cast<T>(n));
}

/// Row sums of a [B, n] matrix, shape [B, 1].
template <typename T>
Var sum_cols(Tape<T>& tape, Var x) {
    const Tensor<T>& xv = tape.value(x);
    detail::require_rank(xv.shape(), 2, "sum_cols");
    const std::size_t B = xv.dim(0), n = xv.dim(1);
    Tensor<T> out(Shape{B, 1});
    for (std::size_t i = 0; i < B; ++i) {
        T s = T(0);
        for (std::size_t j = 0; j < n; ++j) s += xv.at(i, j);
        out[i] = s;
    }
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), tape.requires_grad(x),
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            Tensor<T>& gx = t.grad(x);
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < n; ++j) gx.at(i, j) += g[i];
        },
        "sum_cols");
}

/// Repeats a vector [n] as the rows of a [B, n] matrix.
template <typename T>
Var broadcast_rows(Tape<T>& tape, Var v, std::size_t rows) {
    const Tensor<T>& vv = tape.value(v);
    detail::require_rank(vv.shape(), 1, "broadcast_rows");
    const std::size_t n = vv.dim(0);
    Tensor<T> out(Shape{rows, n});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = vv[j];
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), tape.requires_grad(v),
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            Tensor<T>& gv = t.grad(v);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < n; ++j) gv[j] += g.at(i, j);
        },
        "broadcast_rows");
}

/// Same data viewed with a new shape.
template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape shape) {
    const Tensor<T>& xv = tape.value(x);
    if (shape_size(shape) != xv.size()) {
        throw DimensionError("reshape: cannot view " + shape_str(xv.shape()) + " as " +
                             shape_str(shape));
    }
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        xv.reshaped(std::move(shape)), tape.requires_grad(x),
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            Tensor<T>& gx = t.grad(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        },
        "reshape");
}

/// [B, ...] -> [B, prod(...)].
template <typename T>
Var flatten(Tape<T>& tape, Var x) {
    const Shape& s = tape.shape(x);
    const std::size_t B = s.at(0);
    return reshape(tape, x, Shape{B, shape_size(s) / B});
}

/// Column-wise concatenation of [B, n_i] matrices.
template <typename T>
Var concat_cols(Tape<T>& tape, const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t B = tape.shape(parts[0]).at(0);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    bool rg = false;
    for (Var p : parts) {
        const Shape& s = tape.shape(p);
        if (s.size() != 2 || s[0] != B) {
            throw DimensionError("concat_cols: incompatible part " + shape_str(s));
        }
        widths.push_back(s[1]);
        total += s[1];
        rg = rg || tape.requires_grad(p);
    }
    Tensor<T> out(Shape{B, total});
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor<T>& pv = tape.value(parts[k]);
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) out.at(i, off + j) = pv.at(i, j);
        off += widths[k];
    }
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), rg,
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            std::size_t off = 0;
            for (std::size_t k = 0; k < parts.size(); ++k) {
                if (t.requires_grad(parts[k])) {
                    Tensor<T>& gp = t.grad(parts[k]);
                    for (std::size_t i = 0; i < B; ++i)
                        for (std::size_t j = 0; j < widths[k]; ++j) gp.at(i, j) += g.at(i, off + j);
                }
                off += widths[k];
            }
        },
        "concat_cols");
}

/// Columns [begin, end) of a [B, n] matrix.
template <typename T>
Var slice_cols(Tape<T>& tape, Var x, std::size_t begin, std::size_t end) {
    const Tensor<T>& xv = tape.value(x);
    detail::require_rank(xv.shape(), 2, "slice_cols");
    if (begin >= end || end > xv.dim(1)) {
        throw DimensionError("slice_cols: bad range for shape " + shape_str(xv.shape()));
    }
    const std::size_t B = xv.dim(0), w = end - begin;
    Tensor<T> out(Shape{B, w});
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < w; ++j) out.at(i, j) = xv.at(i, begin + j);
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), tape.requires_grad(x),
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            Tensor<T>& gx = t.grad(x);
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < w; ++j) gx.at(i, begin + j) += g.at(i, j);
        },
        "slice_cols");
}

/// Scales each row of a [B, d] matrix to unit Euclidean norm.
template <typename T>
Var l2_normalize_rows(Tape<T>& tape, Var x) {
    const Tensor<T>& xv = tape.value(x);
    detail::require_rank(xv.shape(), 2, "l2_normalize_rows");
    const std::size_t B = xv.dim(0), d = xv.dim(1);
    auto norms = std::make_shared<std::vector<T>>(B);
    Tensor<T> out(xv.shape());
    for (std::size_t i = 0; i < B; ++i) {
        T s = T(0);
        for (std::size_t j = 0; j < d; ++j) s += xv.at(i, j) * xv.at(i, j);
        const T n = std::sqrt(s);
        (*norms)[i] = n;
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = xv.at(i, j) / n;
    }
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        std::move(out), tape.requires_grad(x),
        [=](Tape<T>& t) {
            const Tensor<T>& g = t.grad(Var{out_id});
            const Tensor<T>& y = t.value(Var{out_id});
            Tensor<T>& gx = t.grad(x);
            for (std::size_t i = 0; i < B; ++i) {
                T dot = T(0);
                for (std::size_t j = 0; j < d; ++j) dot += y.at(i, j) * g.at(i, j);
                const T inv = T(1) / (*norms)[i];
                for (std::size_t j = 0; j < d; ++j) gx.at(i, j) += (g.at(i, j) - y.at(i, j) * dot) * inv;
            }
        },
        "l2_normalize_rows");
}

/// InfoNCE with in-batch negatives: row i of `queries` is positive with row i of
/// `keys`, every other key row is a negative. Returns the mean over rows of
/// -log softmax_j(q_i . k_j / tau)[i], shape [1].
template <typename T>
Var info_nce(Tape<T>& tape, Var queries, Var keys, T tau) {
    const Tensor<T>& qv = tape.value(queries);
    const Tensor<T>& kv = tape.value(keys);
    detail::require_rank(qv.shape(), 2, "info_nce");
    detail::require_same_shape(qv.shape(), kv.shape(), "info_nce");
    const std::size_t B = qv.dim(0), d = qv.dim(1);
    if (B < 2) throw ConfigError("info_nce needs a batch of at least 2 (got " + std::to_string(B) + ")");
    if (!(tau > T(0))) throw ConfigError("info_nce temperature must be positive");
    auto probs = std::make_shared<Tensor<T>>(Shape{B, B});
    auto pm = detail::mat(*probs, B, B);
    pm.noalias() = detail::mat(qv, B, d) * detail::mat(kv, B, d).transpose();
    pm /= tau;
    T total = T(0);
    for (std::size_t i = 0; i < B; ++i) {
        const T mx = pm.row(static_cast<Eigen::Index>(i)).maxCoeff();
        T z = T(0);
        for (std::size_t j = 0; j < B; ++j) z += std::exp(probs->at(i, j) - mx);
        const T lse = mx + std::log(z);
        total += lse - probs->at(i, i);
        for (std::size_t j = 0; j < B; ++j) probs->at(i, j) = std::exp(probs->at(i, j) - lse);
    }
    const bool rg = tape.requires_grad(queries) || tape.requires_grad(keys);
    const auto out_id = static_cast<std::uint32_t>(tape.size());
    return tape.record(
        Tensor<T>::scalar(total / static_cast<T>(B)), rg,
        [=](Tape<T>& t) {
            const T g = t.grad(Var{out_id})[0];
            Tensor<T> dl = *probs;
            for (std::size_t i = 0; i < B; ++i) dl.at(i, i) -= T(1);
            auto dm = detail::mat(dl, B, B);
            dm *= g / (static_cast<T>(B) * tau);
            if (t.requires_grad(queries)) {
                detail::mat(t.grad(queries), B, d).noalias() += dm * detail::mat(t.value(keys), B, d);
            }
            if (t.requires_grad(keys)) {
                detail::mat(t.grad(keys), B, d).noalias() +=
                    dm.transpose() * detail::mat(t.value(queries), B, d);
            }
        },
        "info_nce");
}

}  // namespace m2curl::ops
