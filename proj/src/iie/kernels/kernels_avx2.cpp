#include "iie/kernels/kernels_detail.h"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "iie/util/parallel.h"

namespace iie::kern::detail {

namespace {

// ---------------------------------------------------------------------------
// f32 exp, Cephes-style polynomial on AVX2. ~2 ulp over the clamped range.
// ---------------------------------------------------------------------------

inline __m256 exp256(__m256 x) {
    const __m256 hi = _mm256_set1_ps(88.3762626647949f);
    const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
    const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
    const __m256 c1 = _mm256_set1_ps(0.693359375f);
    const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
    const __m256 p0 = _mm256_set1_ps(1.9875691500e-4f);
    const __m256 p1 = _mm256_set1_ps(1.3981999507e-3f);
    const __m256 p2 = _mm256_set1_ps(8.3334519073e-3f);
    const __m256 p3 = _mm256_set1_ps(4.1665795894e-2f);
    const __m256 p4 = _mm256_set1_ps(1.6666665459e-1f);
    const __m256 p5 = _mm256_set1_ps(5.0000001201e-1f);
    const __m256 one = _mm256_set1_ps(1.0f);

    x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
    __m256 fx = _mm256_fmadd_ps(x, log2e, _mm256_set1_ps(0.5f));
    fx = _mm256_floor_ps(fx);
    __m256 r = _mm256_fnmadd_ps(fx, c1, x);
    r = _mm256_fnmadd_ps(fx, c2, r);

    __m256 y = p0;
    y = _mm256_fmadd_ps(y, r, p1);
    y = _mm256_fmadd_ps(y, r, p2);
    y = _mm256_fmadd_ps(y, r, p3);
    y = _mm256_fmadd_ps(y, r, p4);
    y = _mm256_fmadd_ps(y, r, p5);
    y = _mm256_fmadd_ps(y, _mm256_mul_ps(r, r), _mm256_add_ps(r, one));

    const __m256i n = _mm256_cvtps_epi32(fx);
    const __m256i pow2n = _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(127)), 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(pow2n));
}

inline float hsum(__m256 v) {
    __m128 s = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
}

inline double hsum(__m256d v) {
    __m128d s = _mm_add_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
    s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
    return _mm_cvtsd_f64(s);
}

// ---------------------------------------------------------------------------
// Packed GEMM. MR x NR register tiles: 6x16 for f32, 6x8 for f64.
// B is packed once per call, A per row panel; tails are zero-padded in the
// packed buffers and masked at the store.
// ---------------------------------------------------------------------------

constexpr int MR = 6;

template <class T>
struct Tile;
template <>
struct Tile<float> {
    static constexpr int NR = 16;
};
template <>
struct Tile<double> {
    static constexpr int NR = 8;
};

template <class T>
inline void pack_b_panels(bool trans_b, int64_t k, int64_t n, const T* b, int64_t ldb, T* pb) {
    const int NR = Tile<T>::NR;
    const int64_t npanels = (n + NR - 1) / NR;
    for (int64_t jp = 0; jp < npanels; ++jp) {
        const int64_t j0 = jp * NR;
        const int64_t jl = std::min<int64_t>(NR, n - j0);
        T* dst = pb + jp * k * NR;
        for (int64_t p = 0; p < k; ++p) {
            for (int64_t j = 0; j < jl; ++j)
                dst[p * NR + j] = trans_b ? b[(j0 + j) * ldb + p] : b[p * ldb + j0 + j];
            for (int64_t j = jl; j < NR; ++j) dst[p * NR + j] = T(0);
        }
    }
}

template <class T>
inline void pack_a_panel(bool trans_a, int64_t i0, int64_t rows, int64_t k, const T* a, int64_t lda,
                         T* pa) {
    for (int64_t p = 0; p < k; ++p) {
        for (int64_t r = 0; r < rows; ++r)
            pa[p * MR + r] = trans_a ? a[p * lda + i0 + r] : a[(i0 + r) * lda + p];
        for (int64_t r = rows; r < MR; ++r) pa[p * MR + r] = T(0);
    }
}

void mk_6x16_f32(int64_t k, float alpha, const float* pa, const float* pb, float beta, float* c,
                 int64_t ldc, int mrows, int ncols) {
    __m256 acc[MR][2];
    for (int r = 0; r < MR; ++r) {
        acc[r][0] = _mm256_setzero_ps();
        acc[r][1] = _mm256_setzero_ps();
    }
    for (int64_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(pb + p * 16);
        const __m256 b1 = _mm256_loadu_ps(pb + p * 16 + 8);
        const float* ap = pa + p * MR;
        for (int r = 0; r < MR; ++r) {
            const __m256 av = _mm256_set1_ps(ap[r]);
            acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
        }
    }
    const __m256 va = _mm256_set1_ps(alpha);
    if (ncols == 16) {
        for (int r = 0; r < mrows; ++r) {
            float* cr = c + r * ldc;
            __m256 r0 = _mm256_mul_ps(acc[r][0], va);
            __m256 r1 = _mm256_mul_ps(acc[r][1], va);
            if (beta != 0.0f) {
                r0 = _mm256_add_ps(r0, _mm256_loadu_ps(cr));
                r1 = _mm256_add_ps(r1, _mm256_loadu_ps(cr + 8));
            }
            _mm256_storeu_ps(cr, r0);
            _mm256_storeu_ps(cr + 8, r1);
        }
    } else {
        alignas(32) float tmp[16];
        for (int r = 0; r < mrows; ++r) {
            _mm256_store_ps(tmp, _mm256_mul_ps(acc[r][0], va));
            _mm256_store_ps(tmp + 8, _mm256_mul_ps(acc[r][1], va));
            float* cr = c + r * ldc;
            if (beta != 0.0f)
                for (int j = 0; j < ncols; ++j) cr[j] += tmp[j];
            else
                for (int j = 0; j < ncols; ++j) cr[j] = tmp[j];
        }
    }
}

void mk_6x8_f64(int64_t k, double alpha, const double* pa, const double* pb, double beta, double* c,
                int64_t ldc, int mrows, int ncols) {
    __m256d acc[MR][2];
    for (int r = 0; r < MR; ++r) {
        acc[r][0] = _mm256_setzero_pd();
        acc[r][1] = _mm256_setzero_pd();
    }
    for (int64_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(pb + p * 8);
        const __m256d b1 = _mm256_loadu_pd(pb + p * 8 + 4);
        const double* ap = pa + p * MR;
        for (int r = 0; r < MR; ++r) {
            const __m256d av = _mm256_set1_pd(ap[r]);
            acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
        }
    }
    const __m256d va = _mm256_set1_pd(alpha);
    if (ncols == 8) {
        for (int r = 0; r < mrows; ++r) {
            double* cr = c + r * ldc;
            __m256d r0 = _mm256_mul_pd(acc[r][0], va);
            __m256d r1 = _mm256_mul_pd(acc[r][1], va);
            if (beta != 0.0) {
                r0 = _mm256_add_pd(r0, _mm256_loadu_pd(cr));
                r1 = _mm256_add_pd(r1, _mm256_loadu_pd(cr + 4));
            }
            _mm256_storeu_pd(cr, r0);
            _mm256_storeu_pd(cr + 4, r1);
        }
    } else {
        alignas(32) double tmp[8];
        for (int r = 0; r < mrows; ++r) {
            _mm256_store_pd(tmp, _mm256_mul_pd(acc[r][0], va));
            _mm256_store_pd(tmp + 4, _mm256_mul_pd(acc[r][1], va));
            double* cr = c + r * ldc;
            if (beta != 0.0)
                for (int j = 0; j < ncols; ++j) cr[j] += tmp[j];
            else
                for (int j = 0; j < ncols; ++j) cr[j] = tmp[j];
        }
    }
}

template <class T>
inline void microkernel(int64_t k, T alpha, const T* pa, const T* pb, T beta, T* c, int64_t ldc,
                        int mrows, int ncols);
template <>
inline void microkernel<float>(int64_t k, float alpha, const float* pa, const float* pb, float beta,
                               float* c, int64_t ldc, int mrows, int ncols) {
    mk_6x16_f32(k, alpha, pa, pb, beta, c, ldc, mrows, ncols);
}
template <>
inline void microkernel<double>(int64_t k, double alpha, const double* pa, const double* pb,
                                double beta, double* c, int64_t ldc, int mrows, int ncols) {
    mk_6x8_f64(k, alpha, pa, pb, beta, c, ldc, mrows, ncols);
}

template <class T>
std::vector<T>& tls_buffer(int which) {
    thread_local std::vector<T> buf[3];
    return buf[which];
}

// Row panels are grouped so one parallel_for item packs A once and sweeps all
// column panels; item granularity of 16 panels (96 rows) keeps dispatch cheap.
constexpr int64_t M_GROUP = 16;

template <class T>
void gemm_avx2(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
               int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
    const int NR = Tile<T>::NR;
    if (m <= 0 || n <= 0) return;
    if (k <= 0) {
        if (beta == T(0))
            for (int64_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T(0));
        return;
    }

    const int64_t npanels = (n + NR - 1) / NR;
    std::vector<T>& pb = tls_buffer<T>(0);
    pb.resize(static_cast<size_t>(npanels * k * NR));
    pack_b_panels<T>(trans_b, k, n, b, ldb, pb.data());
    const T* pbd = pb.data();

    const int64_t mpanels = (m + MR - 1) / MR;
    const int64_t groups = (mpanels + M_GROUP - 1) / M_GROUP;
    parallel_for(groups, [&](int64_t g) {
        std::vector<T>& pa = tls_buffer<T>(1);
        pa.resize(static_cast<size_t>(k * MR));
        const int64_t ip_end = std::min(mpanels, (g + 1) * M_GROUP);
        for (int64_t ip = g * M_GROUP; ip < ip_end; ++ip) {
            const int64_t i0 = ip * MR;
            const int mrows = static_cast<int>(std::min<int64_t>(MR, m - i0));
            pack_a_panel<T>(trans_a, i0, mrows, k, a, lda, pa.data());
            for (int64_t jp = 0; jp < npanels; ++jp) {
                const int64_t j0 = jp * NR;
                const int ncols = static_cast<int>(std::min<int64_t>(NR, n - j0));
                microkernel<T>(k, alpha, pa.data(), pbd + jp * k * NR, beta, c + i0 * ldc + j0, ldc,
                               mrows, ncols);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Vector elementwise / reduction kernels.
// ---------------------------------------------------------------------------

float dot_avx2(const float* x, const float* y, int64_t n) {
    __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 16 <= n; i += 16) {
        a0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), a0);
        a1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), a1);
    }
    for (; i + 8 <= n; i += 8)
        a0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), a0);
    float acc = hsum(_mm256_add_ps(a0, a1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double dot_avx2_f64(const double* x, const double* y, int64_t n) {
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
    }
    for (; i + 4 <= n; i += 4)
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    double acc = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_avx2(float a, const float* x, float* y, int64_t n) {
    const __m256 va = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void axpy_avx2_f64(double a, const double* x, double* y, int64_t n) {
    const __m256d va = _mm256_set1_pd(a);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_avx2(const float* a, const float* b, float* o, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] + b[i];
}

void add_avx2_f64(const double* a, const double* b, double* o, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(o + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) o[i] = a[i] + b[i];
}

void mul_avx2(const float* a, const float* b, float* o, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) o[i] = a[i] * b[i];
}

void mul_avx2_f64(const double* a, const double* b, double* o, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(o + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) o[i] = a[i] * b[i];
}

void scale_avx2(float a, const float* x, float* o, int64_t n) {
    const __m256 va = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) o[i] = a * x[i];
}

void scale_avx2_f64(double a, const double* x, double* o, int64_t n) {
    const __m256d va = _mm256_set1_pd(a);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(o + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) o[i] = a * x[i];
}

void vexp_avx2(const float* x, float* o, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, exp256(_mm256_loadu_ps(x + i)));
    if (i < n) {
        alignas(32) float tmp[8] = {0};
        for (int64_t j = i; j < n; ++j) tmp[j - i] = x[j];
        alignas(32) float out[8];
        _mm256_store_ps(out, exp256(_mm256_load_ps(tmp)));
        for (int64_t j = i; j < n; ++j) o[j] = out[j - i];
    }
}

void silu_avx2(const float* x, float* o, int64_t n) {
    const __m256 one = _mm256_set1_ps(1.0f);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), v));
        _mm256_storeu_ps(o + i, _mm256_div_ps(v, _mm256_add_ps(one, e)));
    }
    for (; i < n; ++i) o[i] = x[i] / (1.0f + std::exp(-x[i]));
}

void silu_bwd_avx2(const float* x, const float* g, float* dx, int64_t n) {
    const __m256 one = _mm256_set1_ps(1.0f);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), v));
        const __m256 s = _mm256_div_ps(one, _mm256_add_ps(one, e));
        // s*(1 + x*(1-s))
        const __m256 d = _mm256_mul_ps(s, _mm256_fmadd_ps(v, _mm256_sub_ps(one, s), one));
        _mm256_storeu_ps(dx + i, _mm256_fmadd_ps(_mm256_loadu_ps(g + i), d, _mm256_loadu_ps(dx + i)));
    }
    for (; i < n; ++i) {
        const float s = 1.0f / (1.0f + std::exp(-x[i]));
        dx[i] += g[i] * (s * (1.0f + x[i] * (1.0f - s)));
    }
}

float reduce_max_avx2(const float* x, int64_t n) {
    float m = -std::numeric_limits<float>::infinity();
    int64_t i = 0;
    if (n >= 8) {
        __m256 vm = _mm256_loadu_ps(x);
        for (i = 8; i + 8 <= n; i += 8) vm = _mm256_max_ps(vm, _mm256_loadu_ps(x + i));
        __m128 s = _mm_max_ps(_mm256_castps256_ps128(vm), _mm256_extractf128_ps(vm, 1));
        s = _mm_max_ps(s, _mm_movehl_ps(s, s));
        s = _mm_max_ss(s, _mm_shuffle_ps(s, s, 1));
        m = _mm_cvtss_f32(s);
    }
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

float reduce_sum_avx2(const float* x, int64_t n) {
    __m256 a = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) a = _mm256_add_ps(a, _mm256_loadu_ps(x + i));
    float acc = hsum(a);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

// f64 exp/silu stay scalar: the f64 path is the test oracle, not the hot loop.
void vexp_f64(const double* x, double* o, int64_t n) {
    for (int64_t i = 0; i < n; ++i) o[i] = std::exp(x[i]);
}
void silu_f64(const double* x, double* o, int64_t n) {
    for (int64_t i = 0; i < n; ++i) o[i] = x[i] / (1.0 + std::exp(-x[i]));
}
void silu_bwd_f64(const double* x, const double* g, double* dx, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x[i]));
        dx[i] += g[i] * (s * (1.0 + x[i] * (1.0 - s)));
    }
}
double reduce_max_f64(const double* x, int64_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < n; ++i) m = std::max(m, x[i]);
    return m;
}
double reduce_sum_f64(const double* x, int64_t n) {
    __m256d a = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) a = _mm256_add_pd(a, _mm256_loadu_pd(x + i));
    double acc = hsum(a);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace

bool avx2_available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

template <>
Kernels<float> avx2_table<float>() {
    Kernels<float> t;
    t.gemm = &gemm_avx2<float>;
    t.dot = &dot_avx2;
    t.axpy = &axpy_avx2;
    t.add = &add_avx2;
    t.mul = &mul_avx2;
    t.scale = &scale_avx2;
    t.vexp = &vexp_avx2;
    t.silu = &silu_avx2;
    t.silu_bwd = &silu_bwd_avx2;
    t.reduce_max = &reduce_max_avx2;
    t.reduce_sum = &reduce_sum_avx2;
    return t;
}

template <>
Kernels<double> avx2_table<double>() {
    Kernels<double> t;
    t.gemm = &gemm_avx2<double>;
    t.dot = &dot_avx2_f64;
    t.axpy = &axpy_avx2_f64;
    t.add = &add_avx2_f64;
    t.mul = &mul_avx2_f64;
    t.scale = &scale_avx2_f64;
    t.vexp = &vexp_f64;
    t.silu = &silu_f64;
    t.silu_bwd = &silu_bwd_f64;
    t.reduce_max = &reduce_max_f64;
    t.reduce_sum = &reduce_sum_f64;
    return t;
}

}  // namespace iie::kern::detail

#else  // non-x86: avx2 backend unavailable

namespace iie::kern::detail {
bool avx2_available() { return false; }
template <>
Kernels<float> avx2_table<float>() {
    return scalar_table<float>();
}
template <>
Kernels<double> avx2_table<double>() {
    return scalar_table<double>();
}
}  // namespace iie::kern::detail

#endif
