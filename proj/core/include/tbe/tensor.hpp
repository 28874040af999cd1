#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <numeric>
#include <string>
#include <vector>

#include "tbe/errors.hpp"

namespace tbe {

/// Pins every buffer to a 64-byte boundary. Heap allocations are only
/// 16-byte aligned by default, so wide SIMD kernels would otherwise pick
/// their loop peeling from whatever address the allocator happened to
/// return, perturbing floating-point results in the last ulp between
/// otherwise identical runs.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlignment{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

using AlignedDoubles = std::vector<double, AlignedAllocator<double>>;

/// Dense n-dimensional array of doubles in row-major order. The universal
/// value type of the engine: inputs, activations, parameters, relevances.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(count(shape_), fill) {}

    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values) {
        if (count(shape) != values.size())
            throw ShapeError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape product " + std::to_string(count(shape)));
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_.assign(values.begin(), values.end());
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    AlignedDoubles& values() { return data_; }
    const AlignedDoubles& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
    double at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

    /// Same data, new shape; element count must be preserved.
    Tensor reshaped(std::vector<std::size_t> shape) const {
        if (count(shape) != data_.size())
            throw ShapeError("reshape to incompatible element count");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

private:
    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        std::size_t off = 0;
        std::size_t i = 0;
        for (std::size_t v : idx) {
            off = off * shape_[i] + v;
            ++i;
        }
        return off;
    }

    std::vector<std::size_t> shape_;
    AlignedDoubles data_;
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

}  // namespace tbe
