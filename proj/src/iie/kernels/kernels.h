#pragma once

#include <cstdint>

namespace iie::kern {

// Data-parallel inner loops behind the tensor ops. Every entry point has a
// scalar reference implementation and an AVX2+FMA variant; the active table
// is chosen at runtime (cpuid probe, IIE_KERNELS env override, or an explicit
// select_backend call). Scalar and SIMD variants are equivalence-tested in
// tests/test_kernels.cpp.

enum class Backend { scalar = 0, avx2 = 1 };

const char* backend_name(Backend b);
bool backend_supported(Backend b);
Backend active_backend();

// Returns false (and leaves the active table unchanged) if unsupported.
bool select_backend(Backend b);

template <class T>
struct Kernels {
    // C = beta*C + alpha * op(A)[m x k] * op(B)[k x n]; row-major, arbitrary
    // leading dimensions. beta must be 0 or 1.
    void (*gemm)(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
                 const T* a, int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc);
    T (*dot)(const T* x, const T* y, int64_t n);
    void (*axpy)(T a, const T* x, T* y, int64_t n);        // y += a*x
    void (*add)(const T* a, const T* b, T* o, int64_t n);  // o = a+b
    void (*mul)(const T* a, const T* b, T* o, int64_t n);  // o = a*b
    void (*scale)(T a, const T* x, T* o, int64_t n);       // o = a*x
    void (*vexp)(const T* x, T* o, int64_t n);
    void (*silu)(const T* x, T* o, int64_t n);                    // o = x*sigmoid(x)
    void (*silu_bwd)(const T* x, const T* g, T* dx, int64_t n);   // dx += g*silu'(x)
    T (*reduce_max)(const T* x, int64_t n);
    T (*reduce_sum)(const T* x, int64_t n);
};

// Active dispatch table for the given element type.
template <class T>
const Kernels<T>& K();

// Table for an explicit backend (for equivalence tests).
template <class T>
const Kernels<T>& table(Backend b);

}  // namespace iie::kern
