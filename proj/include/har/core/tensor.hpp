#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "har/core/error.hpp"

namespace har {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense row-major tensor. Sequence data uses (batch, channels, length)
/// ordering. Scalar type is a template parameter: float for training and
/// benchmarking, double for gradient checks.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), data_(check_numel(shape_), fill) {}

    TensorT(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        require(static_cast<int64_t>(data_.size()) == shape_numel(shape_),
                "tensor data size ", data_.size(), " does not match shape ", shape_str(shape_));
    }

    static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }
    static TensorT full(Shape shape, T v) { return TensorT(std::move(shape), v); }

    const Shape& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    T operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 2-D (rows, cols)
    T& at(int r, int c) { return data_[static_cast<size_t>(r) * dim(1) + c]; }
    T at(int r, int c) const { return data_[static_cast<size_t>(r) * dim(1) + c]; }

    // 3-D (batch, channel, position)
    T& at(int b, int c, int l) {
        return data_[(static_cast<size_t>(b) * dim(1) + c) * dim(2) + l];
    }
    T at(int b, int c, int l) const {
        return data_[(static_cast<size_t>(b) * dim(1) + c) * dim(2) + l];
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape_);
        for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

private:
    static size_t check_numel(const Shape& s) {
        for (int d : s) require(d > 0, "tensor dimension must be positive, got shape ", shape_str(s));
        return static_cast<size_t>(shape_numel(s));
    }

    Shape shape_;
    std::vector<T> data_;
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

/// Named trainable tensor. The gradient slot has the value's shape after a
/// backward pass; optimizers consume it and zero it between steps.
template <typename T>
struct ParameterT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;

    ParameterT() = default;
    ParameterT(std::string n, TensorT<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(T(0)); }
};

using Parameter = ParameterT<float>;

}  // namespace har
