#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "iie/util/errors.h"

namespace iie {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

template <class T>
struct TensorData {
    std::vector<T> val;
    std::vector<T> grad;  // empty until requested; same length as val afterwards
    bool requires_grad = false;
};

// Dense row-major tensor. The handle owns a shape; the payload (values, grad
// accumulator, requires-grad flag) is shared, so reshape is free and the
// shared_ptr doubles as the graph-node identity.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(const Shape& s) { return Tensor(s, std::vector<T>(shape_numel(s), T(0))); }

    static Tensor full(const Shape& s, T v) {
        return Tensor(s, std::vector<T>(shape_numel(s), v));
    }

    static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

    static Tensor from_vec(const Shape& s, std::vector<T> v) {
        if (static_cast<int64_t>(v.size()) != shape_numel(s))
            throw shape_error("from_vec: " + shape_str(s) + " needs " +
                              std::to_string(shape_numel(s)) + " values, got " +
                              std::to_string(v.size()));
        return Tensor(s, std::move(v));
    }

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return d_ ? static_cast<int64_t>(d_->val.size()) : 0; }

    T* data() { return d_->val.data(); }
    const T* data() const { return d_->val.data(); }
    std::vector<T>& vec() { return d_->val; }
    const std::vector<T>& vec() const { return d_->val; }

    bool requires_grad() const { return d_ && d_->requires_grad; }

    Tensor& set_requires_grad(bool rg) {
        d_->requires_grad = rg;
        if (rg) ensure_grad();
        return *this;
    }

    void ensure_grad() {
        if (d_->grad.size() != d_->val.size()) d_->grad.assign(d_->val.size(), T(0));
    }

    bool has_grad() const { return d_ && d_->grad.size() == d_->val.size(); }

    T* grad() { return d_->grad.data(); }
    const T* grad() const { return d_->grad.data(); }

    void zero_grad() {
        if (has_grad()) std::fill(d_->grad.begin(), d_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw shape_error("item() on non-scalar tensor " + shape_str(shape_));
        return d_->val[0];
    }

    // Same payload, new shape (element count must match).
    Tensor reshape(const Shape& s) const {
        if (shape_numel(s) != numel())
            throw shape_error("reshape " + shape_str(shape_) + " -> " + shape_str(s));
        Tensor t;
        t.d_ = d_;
        t.shape_ = s;
        return t;
    }

    // Deep copy of values only: a fresh leaf with no graph history.
    Tensor clone() const { return Tensor(shape_, d_->val); }

    bool same_data(const Tensor& o) const { return d_ == o.d_; }

    bool all_finite() const {
        for (const T v : d_->val)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    const std::shared_ptr<TensorData<T>>& handle() const { return d_; }

private:
    Tensor(Shape s, std::vector<T> v) : d_(std::make_shared<TensorData<T>>()), shape_(std::move(s)) {
        d_->val = std::move(v);
    }

    std::shared_ptr<TensorData<T>> d_;
    Shape shape_;
};

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw shape_error(std::string(op) + ": mismatched shapes " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
}

}  // namespace iie
