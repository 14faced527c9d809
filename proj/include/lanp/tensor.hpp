#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <vector>

#include "lanp/errors.hpp"

namespace lanp {

namespace detail {
// vector allocator that default-initializes doubles, so op kernels that
// fully overwrite their output skip one memset over the buffer
template <class T>
struct uninit_alloc : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = uninit_alloc<U>;
    };
    template <class U>
    void construct(U* p) noexcept {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};
} // namespace detail

// Dense row-major tensor of 64-bit floats. Everything in the library is
// rank 0..2; rank-0 behaves as 1x1 and rank-1 as a 1xN row vector.
class Tensor {
public:
    using Buffer = std::vector<double, detail::uninit_alloc<double>>;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        if (data_.size() != count(shape_))
            throw ShapeError("Tensor: data length does not match shape");
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    static Tensor row(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor({1, n}, std::move(v));
    }

    static Tensor zeros(std::size_t r, std::size_t c) { return Tensor({r, c}); }

    // contents unspecified; caller must write every element
    static Tensor uninit(std::size_t r, std::size_t c) {
        Tensor t;
        t.shape_ = {r, c};
        t.data_.resize(r * c);
        return t;
    }

    static Tensor full(std::size_t r, std::size_t c, double v) {
        Tensor t({r, c});
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }

    std::size_t rows() const {
        if (shape_.size() > 2) throw ShapeError("Tensor: rank > 2 has no rows()");
        return shape_.size() == 2 ? shape_[0] : 1;
    }
    std::size_t cols() const {
        if (shape_.size() > 2) throw ShapeError("Tensor: rank > 2 has no cols()");
        if (shape_.empty()) return 1;
        return shape_.back();
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool same_shape(const Tensor& o) const {
        return rows() == o.rows() && cols() == o.cols();
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool bitwise_equal(const Tensor& o) const {
        if (shape_ != o.shape_) return false;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            // bit compare; distinguishes -0.0 from 0.0 and NaN payloads
            if (std::memcmp(&data_[i], &o.data_[i], sizeof(double)) != 0) return false;
        }
        return true;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

private:
    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return n;
    }

    std::vector<std::size_t> shape_;
    Buffer data_;
};

} // namespace lanp
