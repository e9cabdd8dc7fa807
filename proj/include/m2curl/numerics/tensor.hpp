#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <new>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "m2curl/errors.hpp"

namespace m2curl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/// 64-byte aligned storage. Vectorized kernels pick their code path from the
/// buffer alignment, so a fixed alignment keeps results bit-reproducible.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

/// Dense row-major array. The element count always equals the product of the extents.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() : shape_{0} {}

    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

    Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        if (shape_size(shape_) != data_.size()) {
            throw DimensionError("tensor data size " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
        }
    }

    static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

    static Tensor vector(std::initializer_list<T> values) {
        return Tensor(Shape{values.size()}, std::vector<T>(values));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
        return Tensor(Shape{rows, cols}, std::vector<T>(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* raw() noexcept { return data_.data(); }
    const T* raw() const noexcept { return data_.data(); }
    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::vector<T> storage() const { return {data_.begin(), data_.end()}; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }

    T item() const {
        if (data_.size() != 1) {
            throw ContractError("item() on tensor of shape " + shape_str(shape_));
        }
        return data_[0];
    }

    /// Same data, new extents; element count must match.
    Tensor reshaped(Shape shape) const {
        if (shape_size(shape) != data_.size()) {
            throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        }
        Tensor out = *this;
        out.shape_ = std::move(shape);
        return out;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<T, AlignedAllocator<T>> data_;
};

}  // namespace m2curl
