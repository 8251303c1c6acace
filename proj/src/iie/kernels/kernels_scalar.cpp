#include "iie/kernels/kernels_detail.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "iie/util/parallel.h"

// Reference kernels. Deliberately plain loops: the dot-product accumulation
// order here is the semantics the oracles in the test suite assume, so keep
// the inner loops in this file boring.

namespace iie::kern::detail {

namespace {

template <class T>
void gemm_scalar(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
                 const T* a, int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
    auto at = [&](int64_t i, int64_t p) { return trans_a ? a[p * lda + i] : a[i * lda + p]; };
    auto bt = [&](int64_t p, int64_t j) { return trans_b ? b[j * ldb + p] : b[p * ldb + j]; };
    parallel_for(m, [&](int64_t i) {
        for (int64_t j = 0; j < n; ++j) {
            T acc = 0;
            for (int64_t p = 0; p < k; ++p) acc += at(i, p) * bt(p, j);
            T* out = c + i * ldc + j;
            *out = (beta == T(0) ? T(0) : *out) + alpha * acc;
        }
    });
}

template <class T>
T dot_scalar(const T* x, const T* y, int64_t n) {
    T acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <class T>
void axpy_scalar(T a, const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void add_scalar(const T* a, const T* b, T* o, int64_t n) {
    for (int64_t i = 0; i < n; ++i) o[i] = a[i] + b[i];
}

template <class T>
void mul_scalar(const T* a, const T* b, T* o, int64_t n) {
    for (int64_t i = 0; i < n; ++i) o[i] = a[i] * b[i];
}

template <class T>
void scale_scalar(T a, const T* x, T* o, int64_t n) {
    for (int64_t i = 0; i < n; ++i) o[i] = a * x[i];
}

template <class T>
void vexp_scalar(const T* x, T* o, int64_t n) {
    for (int64_t i = 0; i < n; ++i) o[i] = std::exp(x[i]);
}

template <class T>
void silu_scalar(const T* x, T* o, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        o[i] = x[i] * s;
    }
}

template <class T>
void silu_bwd_scalar(const T* x, const T* g, T* dx, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        dx[i] += g[i] * (s * (T(1) + x[i] * (T(1) - s)));
    }
}

template <class T>
T reduce_max_scalar(const T* x, int64_t n) {
    T m = -std::numeric_limits<T>::infinity();
    for (int64_t i = 0; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

template <class T>
T reduce_sum_scalar(const T* x, int64_t n) {
    T acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace

template <class T>
Kernels<T> scalar_table() {
    Kernels<T> t;
    t.gemm = &gemm_scalar<T>;
    t.dot = &dot_scalar<T>;
    t.axpy = &axpy_scalar<T>;
    t.add = &add_scalar<T>;
    t.mul = &mul_scalar<T>;
    t.scale = &scale_scalar<T>;
    t.vexp = &vexp_scalar<T>;
    t.silu = &silu_scalar<T>;
    t.silu_bwd = &silu_bwd_scalar<T>;
    t.reduce_max = &reduce_max_scalar<T>;
    t.reduce_sum = &reduce_sum_scalar<T>;
    return t;
}

template Kernels<float> scalar_table<float>();
template Kernels<double> scalar_table<double>();

}  // namespace iie::kern::detail
