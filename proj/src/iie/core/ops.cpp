#include "iie/core/ops.h"

#include <atomic>
#include <cmath>
#include <cstring>

#include "iie/kernels/kernels.h"
#include "iie/util/parallel.h"

namespace iie {

namespace {

std::atomic<bool> g_finite_checks{true};

template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
    if (!g_finite_checks.load(std::memory_order_relaxed)) return;
    if (!t.all_finite()) throw internal_error(std::string(op) + ": non-finite output");
}

template <class T>
std::vector<T>& tls_scratch(int which) {
    thread_local std::vector<T> buf[2];
    return buf[which];
}

}  // namespace

void set_finite_checks(bool on) { g_finite_checks.store(on, std::memory_order_relaxed); }
bool finite_checks() { return g_finite_checks.load(std::memory_order_relaxed); }

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    kern::K<T>().add(a.data(), b.data(), out.data(), a.numel());
    check_finite(out, "add");
    if (recording_for<T>({&a, &b})) {
        out.set_requires_grad(true);
        Tensor<T> ac = a, bc = b, oc = out;
        Graph<T>::current()->record([ac, bc, oc]() mutable {
            const int64_t n = oc.numel();
            if (ac.requires_grad()) kern::K<T>().axpy(T(1), oc.grad(), ac.grad(), n);
            if (bc.requires_grad()) kern::K<T>().axpy(T(1), oc.grad(), bc.grad(), n);
        });
    }
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, double c) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    kern::K<T>().scale(static_cast<T>(c), a.data(), out.data(), a.numel());
    check_finite(out, "scale");
    if (recording_for<T>({&a})) {
        out.set_requires_grad(true);
        Tensor<T> ac = a, oc = out;
        const T cc = static_cast<T>(c);
        Graph<T>::current()->record([ac, oc, cc]() mutable {
            if (ac.requires_grad()) kern::K<T>().axpy(cc, oc.grad(), ac.grad(), oc.numel());
        });
    }
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    kern::K<T>().mul(a.data(), b.data(), out.data(), a.numel());
    check_finite(out, "mul");
    if (recording_for<T>({&a, &b})) {
        out.set_requires_grad(true);
        Tensor<T> ac = a, bc = b, oc = out;
        Graph<T>::current()->record([ac, bc, oc]() mutable {
            const int64_t n = oc.numel();
            const T* g = oc.grad();
            if (ac.requires_grad()) {
                T* da = ac.grad();
                const T* bv = bc.data();
                for (int64_t i = 0; i < n; ++i) da[i] += g[i] * bv[i];
            }
            if (bc.requires_grad()) {
                T* db = bc.grad();
                const T* av = ac.data();
                for (int64_t i = 0; i < n; ++i) db[i] += g[i] * av[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw shape_error("matmul: expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                          shape_str(b.shape()));
    const int64_t m = trans_a ? a.dim(1) : a.dim(0);
    const int64_t ka = trans_a ? a.dim(0) : a.dim(1);
    const int64_t kb = trans_b ? b.dim(1) : b.dim(0);
    const int64_t n = trans_b ? b.dim(0) : b.dim(1);
    if (ka != kb)
        throw shape_error("matmul: inner extents differ, " + shape_str(a.shape()) +
                          (trans_a ? "^T" : "") + " x " + shape_str(b.shape()) +
                          (trans_b ? "^T" : ""));

    Tensor<T> out = Tensor<T>::zeros({m, n});
    kern::K<T>().gemm(trans_a, trans_b, m, n, ka, T(1), a.data(), a.dim(1), b.data(), b.dim(1),
                      T(0), out.data(), n);
    check_finite(out, "matmul");

    if (recording_for<T>({&a, &b})) {
        out.set_requires_grad(true);
        Tensor<T> ac = a, bc = b, oc = out;
        const int64_t kk = ka;
        Graph<T>::current()->record([ac, bc, oc, trans_a, trans_b, m, n, kk]() mutable {
            const T* g = oc.grad();
            if (ac.requires_grad()) {
                // dA accumulates g x B arranged to match op(A)'s layout.
                if (!trans_a)
                    kern::K<T>().gemm(false, !trans_b, m, kk, n, T(1), g, n, bc.data(), bc.dim(1),
                                      T(1), ac.grad(), ac.dim(1));
                else
                    kern::K<T>().gemm(trans_b, true, kk, m, n, T(1), bc.data(), bc.dim(1), g, n,
                                      T(1), ac.grad(), ac.dim(1));
            }
            if (bc.requires_grad()) {
                if (!trans_b)
                    kern::K<T>().gemm(!trans_a, false, kk, n, m, T(1), ac.data(), ac.dim(1), g, n,
                                      T(1), bc.grad(), bc.dim(1));
                else
                    kern::K<T>().gemm(true, trans_a, n, kk, m, T(1), g, n, ac.data(), ac.dim(1),
                                      T(1), bc.grad(), bc.dim(1));
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// embedding
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int32_t>& ids) {
    if (table.ndim() != 2) throw shape_error("embedding: table must be 2-D");
    const int64_t vocab = table.dim(0);
    const int64_t d = table.dim(1);
    const int64_t n = static_cast<int64_t>(ids.size());
    for (int64_t i = 0; i < n; ++i)
        if (ids[i] < 0 || ids[i] >= vocab)
            throw index_error("embedding: id " + std::to_string(ids[i]) + " out of range [0, " +
                              std::to_string(vocab) + ")");
    Tensor<T> out = Tensor<T>::zeros({n, d});
    const T* tv = table.data();
    T* ov = out.data();
    for (int64_t i = 0; i < n; ++i) std::memcpy(ov + i * d, tv + ids[i] * d, sizeof(T) * d);
    if (recording_for<T>({&table})) {
        out.set_requires_grad(true);
        Tensor<T> tc = table, oc = out;
        std::vector<int32_t> idc = ids;
        Graph<T>::current()->record([tc, oc, idc, d]() mutable {
            if (!tc.requires_grad()) return;
            const T* g = oc.grad();
            T* dt = tc.grad();
            for (size_t i = 0; i < idc.size(); ++i)
                kern::K<T>().axpy(T(1), g + static_cast<int64_t>(i) * d, dt + idc[i] * d, d);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// rope
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> rope(const Tensor<T>& x, int n_heads, const std::vector<int32_t>& positions) {
    if (x.ndim() != 3) throw shape_error("rope: expects [B,T,D], got " + shape_str(x.shape()));
    const int64_t bsz = x.dim(0), tlen = x.dim(1), dmodel = x.dim(2);
    if (dmodel % n_heads != 0) throw config_error("rope: d_model not divisible by n_heads");
    const int64_t dh = dmodel / n_heads;
    if (dh % 2 != 0) throw config_error("rope: head dimension must be even, got " + std::to_string(dh));
    if (static_cast<int64_t>(positions.size()) != tlen)
        throw shape_error("rope: positions length " + std::to_string(positions.size()) +
                          " != sequence length " + std::to_string(tlen));

    const int64_t half = dh / 2;
    auto cs = std::make_shared<std::vector<T>>(tlen * half * 2);
    for (int64_t t = 0; t < tlen; ++t) {
        for (int64_t p = 0; p < half; ++p) {
            const double theta = std::pow(10000.0, -2.0 * static_cast<double>(p) /
                                                       static_cast<double>(dh));
            const double ang = static_cast<double>(positions[t]) * theta;
            (*cs)[(t * half + p) * 2] = static_cast<T>(std::cos(ang));
            (*cs)[(t * half + p) * 2 + 1] = static_cast<T>(std::sin(ang));
        }
    }

    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xv = x.data();
    T* ov = out.data();
    for (int64_t b = 0; b < bsz; ++b)
        for (int64_t t = 0; t < tlen; ++t)
            for (int64_t h = 0; h < n_heads; ++h) {
                const int64_t base = ((b * tlen + t) * dmodel) + h * dh;
                for (int64_t p = 0; p < half; ++p) {
                    const T c = (*cs)[(t * half + p) * 2];
                    const T s = (*cs)[(t * half + p) * 2 + 1];
                    const T x0 = xv[base + 2 * p], x1 = xv[base + 2 * p + 1];
                    ov[base + 2 * p] = c * x0 - s * x1;
                    ov[base + 2 * p + 1] = s * x0 + c * x1;
                }
            }
    check_finite(out, "rope");

    if (recording_for<T>({&x})) {
        out.set_requires_grad(true);
        Tensor<T> xc = x, oc = out;
        Graph<T>::current()->record([xc, oc, cs, bsz, tlen, dmodel, n_heads, dh, half]() mutable {
            if (!xc.requires_grad()) return;
            const T* g = oc.grad();
            T* dx = xc.grad();
            // transpose of a rotation is the inverse rotation
            for (int64_t b = 0; b < bsz; ++b)
                for (int64_t t = 0; t < tlen; ++t)
                    for (int64_t h = 0; h < n_heads; ++h) {
                        const int64_t base = ((b * tlen + t) * dmodel) + h * dh;
                        for (int64_t p = 0; p < half; ++p) {
                            const T c = (*cs)[(t * half + p) * 2];
                            const T s = (*cs)[(t * half + p) * 2 + 1];
                            const T g0 = g[base + 2 * p], g1 = g[base + 2 * p + 1];
                            dx[base + 2 * p] += c * g0 + s * g1;
                            dx[base + 2 * p + 1] += -s * g0 + c * g1;
                        }
                    }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// causal attention (fused)
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> causal_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                           int n_heads) {
    if (q.ndim() != 3) throw shape_error("attention: expects [B,T,D]");
    check_same_shape(q, k, "attention(q,k)");
    check_same_shape(q, v, "attention(q,v)");
    const int64_t bsz = q.dim(0), tlen = q.dim(1), dmodel = q.dim(2);
    if (dmodel % n_heads != 0) throw config_error("attention: d_model not divisible by n_heads");
    const int64_t dh = dmodel / n_heads;
    const T scl = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    Tensor<T> out = Tensor<T>::zeros(q.shape());
    auto probs = std::make_shared<std::vector<T>>(bsz * n_heads * tlen * tlen);

    const auto& kk = kern::K<T>();
    const T* qv = q.data();
    const T* kv = k.data();
    const T* vv = v.data();
    T* ov = out.data();
    T* pv = probs->data();

    parallel_for(bsz * n_heads, [&](int64_t bh) {
        const int64_t b = bh / n_heads, h = bh % n_heads;
        const int64_t off = b * tlen * dmodel + h * dh;
        T* p = pv + bh * tlen * tlen;
        // scores into the probs buffer, then softmax rows in place
        kk.gemm(false, true, tlen, tlen, dh, scl, qv + off, dmodel, kv + off, dmodel, T(0), p,
                tlen);
        for (int64_t i = 0; i < tlen; ++i) {
            T* row = p + i * tlen;
            const int64_t len = i + 1;
            const T m = kk.reduce_max(row, len);
            for (int64_t j = 0; j < len; ++j) row[j] -= m;
            kk.vexp(row, row, len);
            const T inv = T(1) / kk.reduce_sum(row, len);
            kk.scale(inv, row, row, len);
            for (int64_t j = len; j < tlen; ++j) row[j] = T(0);
        }
        kk.gemm(false, false, tlen, dh, tlen, T(1), p, tlen, vv + off, dmodel, T(0), ov + off,
                dmodel);
    });
    check_finite(out, "causal_attention");

    if (recording_for<T>({&q, &k, &v})) {
        out.set_requires_grad(true);
        Tensor<T> qc = q, kc = k, vc = v, oc = out;
        Graph<T>::current()->record([qc, kc, vc, oc, probs, bsz, tlen, dmodel, n_heads, dh,
                                     scl]() mutable {
            const auto& kt = kern::K<T>();
            const T* g = oc.grad();
            const T* pv = probs->data();
            parallel_for(bsz * n_heads, [&](int64_t bh) {
                const int64_t b = bh / n_heads, h = bh % n_heads;
                const int64_t off = b * tlen * dmodel + h * dh;
                const T* p = pv + bh * tlen * tlen;
                std::vector<T>& ds = tls_scratch<T>(0);
                ds.resize(tlen * tlen);
                // dprobs = dout * V^T
                kt.gemm(false, true, tlen, tlen, dh, T(1), g + off, dmodel, vc.data() + off,
                        dmodel, T(0), ds.data(), tlen);
                if (vc.requires_grad())
                    kt.gemm(true, false, tlen, dh, tlen, T(1), p, tlen, g + off, dmodel, T(1),
                            vc.grad() + off, dmodel);
                // softmax backward per causal row, in place
                for (int64_t i = 0; i < tlen; ++i) {
                    T* row = ds.data() + i * tlen;
                    const T* prow = p + i * tlen;
                    const int64_t len = i + 1;
                    const T c = kt.dot(row, prow, len);
                    for (int64_t j = 0; j < len; ++j) row[j] = prow[j] * (row[j] - c);
                    for (int64_t j = len; j < tlen; ++j) row[j] = T(0);
                }
                if (qc.requires_grad())
                    kt.gemm(false, false, tlen, dh, tlen, scl, ds.data(), tlen, kc.data() + off,
                            dmodel, T(1), qc.grad() + off, dmodel);
                if (kc.requires_grad())
                    kt.gemm(true, false, tlen, dh, tlen, scl, ds.data(), tlen, qc.data() + off,
                            dmodel, T(1), kc.grad() + off, dmodel);
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// rms_norm
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> rms_norm(const Tensor<T>& x, const Tensor<T>& gain, double eps) {
    const int64_t d = gain.numel();
    if (x.numel() % d != 0 || x.dim(x.ndim() - 1) != d)
        throw shape_error("rms_norm: trailing extent of " + shape_str(x.shape()) +
                          " must equal gain length " + std::to_string(d));
    const int64_t rows = x.numel() / d;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto inv = std::make_shared<std::vector<T>>(rows);

    const auto& kk = kern::K<T>();
    const T* xv = x.data();
    const T* gv = gain.data();
    T* ov = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = xv + r * d;
        const T ms = kk.dot(xr, xr, d) / static_cast<T>(d);
        const T iv = T(1) / std::sqrt(ms + static_cast<T>(eps));
        (*inv)[r] = iv;
        T* orow = ov + r * d;
        for (int64_t j = 0; j < d; ++j) orow[j] = xr[j] * iv * gv[j];
    }
    check_finite(out, "rms_norm");

    if (recording_for<T>({&x, &gain})) {
        out.set_requires_grad(true);
        Tensor<T> xc = x, gc = gain, oc = out;
        Graph<T>::current()->record([xc, gc, oc, inv, rows, d]() mutable {
            const auto& kt = kern::K<T>();
            const T* g = oc.grad();
            const T* xv = xc.data();
            const T* gv = gc.data();
            std::vector<T>& geff = tls_scratch<T>(0);
            geff.resize(d);
            for (int64_t r = 0; r < rows; ++r) {
                const T* xr = xv + r * d;
                const T* grow = g + r * d;
                const T iv = (*inv)[r];
                if (gc.requires_grad()) {
                    T* dg = gc.grad();
                    for (int64_t j = 0; j < d; ++j) dg[j] += grow[j] * xr[j] * iv;
                }
                if (xc.requires_grad()) {
                    kt.mul(grow, gv, geff.data(), d);
                    const T a = kt.dot(geff.data(), xr, d);
                    const T c = a * iv * iv * iv / static_cast<T>(d);
                    T* dx = xc.grad() + r * d;
                    for (int64_t j = 0; j < d; ++j) dx[j] += iv * geff[j] - c * xr[j];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// silu
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    kern::K<T>().silu(x.data(), out.data(), x.numel());
    check_finite(out, "silu");
    if (recording_for<T>({&x})) {
        out.set_requires_grad(true);
        Tensor<T> xc = x, oc = out;
        Graph<T>::current()->record([xc, oc]() mutable {
            if (xc.requires_grad())
                kern::K<T>().silu_bwd(xc.data(), oc.grad(), xc.grad(), xc.numel());
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// weighted_sum / add_list / ema_weights / sum
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> weighted_sum(const Tensor<T>& base, std::span<const Tensor<T>> xs,
                       const Tensor<T>& coefs) {
    if (coefs.numel() != static_cast<int64_t>(xs.size()))
        throw shape_error("weighted_sum: " + std::to_string(xs.size()) + " terms but " +
                          std::to_string(coefs.numel()) + " coefficients");
    for (const auto& t : xs) check_same_shape(base, t, "weighted_sum");

    Tensor<T> out = base.clone();
    const T* cv = coefs.data();
    for (size_t j = 0; j < xs.size(); ++j)
        kern::K<T>().axpy(cv[j], xs[j].data(), out.data(), out.numel());
    check_finite(out, "weighted_sum");

    bool rec = Graph<T>::current() != nullptr &&
               (base.requires_grad() || coefs.requires_grad() ||
                std::any_of(xs.begin(), xs.end(), [](const Tensor<T>& t) { return t.requires_grad(); }));
    if (rec) {
        out.set_requires_grad(true);
        Tensor<T> bc = base, cc = coefs, oc = out;
        std::vector<Tensor<T>> xv(xs.begin(), xs.end());
        Graph<T>::current()->record([bc, cc, oc, xv]() mutable {
            const int64_t n = oc.numel();
            const T* g = oc.grad();
            if (bc.requires_grad()) kern::K<T>().axpy(T(1), g, bc.grad(), n);
            const T* cv = cc.data();
            for (size_t j = 0; j < xv.size(); ++j) {
                if (xv[j].requires_grad()) kern::K<T>().axpy(cv[j], g, xv[j].grad(), n);
                if (cc.requires_grad()) cc.grad()[j] += kern::K<T>().dot(g, xv[j].data(), n);
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> add_list(std::span<const Tensor<T>> xs) {
    if (xs.empty()) throw shape_error("add_list: empty term list");
    Tensor<T> out = xs[0].clone();
    for (size_t j = 1; j < xs.size(); ++j) {
        check_same_shape(xs[0], xs[j], "add_list");
        kern::K<T>().axpy(T(1), xs[j].data(), out.data(), out.numel());
    }
    check_finite(out, "add_list");
    bool rec = Graph<T>::current() != nullptr &&
               std::any_of(xs.begin(), xs.end(), [](const Tensor<T>& t) { return t.requires_grad(); });
    if (rec) {
        out.set_requires_grad(true);
        Tensor<T> oc = out;
        std::vector<Tensor<T>> xv(xs.begin(), xs.end());
        Graph<T>::current()->record([oc, xv]() mutable {
            for (auto& t : xv)
                if (t.requires_grad()) kern::K<T>().axpy(T(1), oc.grad(), t.grad(), oc.numel());
        });
    }
    return out;
}

template <class T>
Tensor<T> ema_weights(const Tensor<T>& gamma, int order) {
    if (gamma.numel() != 1) throw shape_error("ema_weights: gamma must be scalar");
    if (order < 1) throw param_error("ema_weights: order must be >= 1");
    const T g = gamma.data()[0];
    Tensor<T> out = Tensor<T>::zeros({order});
    for (int i = 1; i <= order; ++i)
        out.data()[i - 1] = g * static_cast<T>(std::pow(1.0 - static_cast<double>(g),
                                                        static_cast<double>(order - i)));
    check_finite(out, "ema_weights");
    if (recording_for<T>({&gamma})) {
        out.set_requires_grad(true);
        Tensor<T> gc = gamma, oc = out;
        Graph<T>::current()->record([gc, oc, order]() mutable {
            if (!gc.requires_grad()) return;
            const double g = static_cast<double>(gc.data()[0]);
            double acc = 0;
            for (int i = 1; i <= order; ++i) {
                const int m = order - i;
                const double dw =
                    std::pow(1.0 - g, m) - (m > 0 ? g * m * std::pow(1.0 - g, m - 1) : 0.0);
                acc += static_cast<double>(oc.grad()[i - 1]) * dw;
            }
            gc.grad()[0] += static_cast<T>(acc);
        });
    }
    return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::scalar(kern::K<T>().reduce_sum(x.data(), x.numel()));
    check_finite(out, "sum");
    if (recording_for<T>({&x})) {
        out.set_requires_grad(true);
        Tensor<T> xc = x, oc = out;
        Graph<T>::current()->record([xc, oc]() mutable {
            if (!xc.requires_grad()) return;
            const T g = oc.grad()[0];
            T* dx = xc.grad();
            for (int64_t i = 0; i < xc.numel(); ++i) dx[i] += g;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int32_t>& targets) {
    if (logits.ndim() != 2) throw shape_error("softmax_cross_entropy: logits must be [N,V]");
    const int64_t n = logits.dim(0), vocab = logits.dim(1);
    if (static_cast<int64_t>(targets.size()) != n)
        throw shape_error("softmax_cross_entropy: " + std::to_string(targets.size()) +
                          " targets for " + std::to_string(n) + " rows");
    for (int64_t i = 0; i < n; ++i)
        if (targets[i] < 0 || targets[i] >= vocab)
            throw index_error("softmax_cross_entropy: target " + std::to_string(targets[i]) +
                              " out of range [0, " + std::to_string(vocab) + ")");

    const auto& kk = kern::K<T>();
    auto probs = std::make_shared<std::vector<T>>(n * vocab);
    const T* lv = logits.data();
    T* pv = probs->data();
    double loss = 0;
    for (int64_t i = 0; i < n; ++i) {
        const T* row = lv + i * vocab;
        T* prow = pv + i * vocab;
        const T m = kk.reduce_max(row, vocab);
        for (int64_t j = 0; j < vocab; ++j) prow[j] = row[j] - m;
        kk.vexp(prow, prow, vocab);
        const T z = kk.reduce_sum(prow, vocab);
        kk.scale(T(1) / z, prow, prow, vocab);
        loss += std::log(static_cast<double>(z)) -
                static_cast<double>(row[targets[i]]) + static_cast<double>(m);
    }
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(loss / static_cast<double>(n)));
    check_finite(out, "softmax_cross_entropy");

    if (recording_for<T>({&logits})) {
        out.set_requires_grad(true);
        Tensor<T> lc = logits, oc = out;
        std::vector<int32_t> tc = targets;
        Graph<T>::current()->record([lc, oc, probs, tc, n, vocab]() mutable {
            if (!lc.requires_grad()) return;
            const T g = oc.grad()[0] / static_cast<T>(n);
            T* dl = lc.grad();
            const T* pv = probs->data();
            for (int64_t i = 0; i < n; ++i) {
                kern::K<T>().axpy(g, pv + i * vocab, dl + i * vocab, vocab);
                dl[i * vocab + tc[i]] -= g;
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mse");
    const int64_t rows = a.dim(0);
    const int64_t n = a.numel();
    const T* av = a.data();
    const T* bv = b.data();
    double acc = 0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
        acc += d * d;
    }
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(rows)));
    check_finite(out, "mse");

    if (recording_for<T>({&a, &b})) {
        out.set_requires_grad(true);
        Tensor<T> ac = a, bc = b, oc = out;
        Graph<T>::current()->record([ac, bc, oc, rows, n]() mutable {
            const T g = oc.grad()[0] * T(2) / static_cast<T>(rows);
            const T* av = ac.data();
            const T* bv = bc.data();
            if (ac.requires_grad()) {
                T* da = ac.grad();
                for (int64_t i = 0; i < n; ++i) da[i] += g * (av[i] - bv[i]);
            }
            if (bc.requires_grad()) {
                T* db = bc.grad();
                for (int64_t i = 0; i < n; ++i) db[i] -= g * (av[i] - bv[i]);
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> kl_temperature(const Tensor<T>& teacher, const Tensor<T>& student, double tau) {
    if (tau <= 0) throw param_error("kl_temperature: tau must be positive, got " + std::to_string(tau));
    check_same_shape(teacher, student, "kl_temperature");
    if (teacher.ndim() != 2) throw shape_error("kl_temperature: logits must be [N,V]");
    const int64_t n = teacher.dim(0), vocab = teacher.dim(1);
    const T itau = static_cast<T>(1.0 / tau);

    const auto& kk = kern::K<T>();
    auto pbuf = std::make_shared<std::vector<T>>(n * vocab);  // teacher probs
    auto qbuf = std::make_shared<std::vector<T>>(n * vocab);  // student probs
    std::vector<T> lp(vocab), lq(vocab);

    const T* tv = teacher.data();
    const T* sv = student.data();
    double loss = 0;
    for (int64_t i = 0; i < n; ++i) {
        const T* trow = tv + i * vocab;
        const T* srow = sv + i * vocab;
        // log-softmax of scaled logits for both rows
        T tm = trow[0] * itau, sm = srow[0] * itau;
        for (int64_t j = 1; j < vocab; ++j) {
            tm = std::max(tm, trow[j] * itau);
            sm = std::max(sm, srow[j] * itau);
        }
        double tz = 0, sz = 0;
        for (int64_t j = 0; j < vocab; ++j) {
            lp[j] = trow[j] * itau - tm;
            lq[j] = srow[j] * itau - sm;
        }
        T* prow = pbuf->data() + i * vocab;
        T* qrow = qbuf->data() + i * vocab;
        kk.vexp(lp.data(), prow, vocab);
        kk.vexp(lq.data(), qrow, vocab);
        tz = kk.reduce_sum(prow, vocab);
        sz = kk.reduce_sum(qrow, vocab);
        kk.scale(static_cast<T>(1.0 / tz), prow, prow, vocab);
        kk.scale(static_cast<T>(1.0 / sz), qrow, qrow, vocab);
        const double ltz = std::log(tz), lsz = std::log(sz);
        for (int64_t j = 0; j < vocab; ++j)
            loss += static_cast<double>(prow[j]) *
                    ((static_cast<double>(lp[j]) - ltz) - (static_cast<double>(lq[j]) - lsz));
    }
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(loss / static_cast<double>(n)));
    check_finite(out, "kl_temperature");

    // teacher side is detached by construction: only the student receives grad
    if (Graph<T>::current() != nullptr && student.requires_grad()) {
        out.set_requires_grad(true);
        Tensor<T> sc = student, oc = out;
        Graph<T>::current()->record([sc, oc, pbuf, qbuf, n, vocab, itau]() mutable {
            const T g = oc.grad()[0] * itau / static_cast<T>(n);
            T* ds = sc.grad();
            const T* pv = pbuf->data();
            const T* qv = qbuf->data();
            for (int64_t i = 0; i < n * vocab; ++i) ds[i] += g * (qv[i] - pv[i]);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------

#define IIE_INSTANTIATE(T)                                                                        \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> scale(const Tensor<T>&, double);                                           \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, bool, bool);                    \
    template Tensor<T> embedding(const Tensor<T>&, const std::vector<int32_t>&);                  \
    template Tensor<T> rope(const Tensor<T>&, int, const std::vector<int32_t>&);                  \
    template Tensor<T> causal_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                        int);                                                     \
    template Tensor<T> rms_norm(const Tensor<T>&, const Tensor<T>&, double);                      \
    template Tensor<T> silu(const Tensor<T>&);                                                    \
    template Tensor<T> weighted_sum(const Tensor<T>&, std::span<const Tensor<T>>,                 \
                                    const Tensor<T>&);                                            \
    template Tensor<T> add_list(std::span<const Tensor<T>>);                                      \
    template Tensor<T> ema_weights(const Tensor<T>&, int);                                        \
    template Tensor<T> sum(const Tensor<T>&);                                                     \
    template Tensor<T> softmax_cross_entropy(const Tensor<T>&, const std::vector<int32_t>&);      \
    template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> kl_temperature(const Tensor<T>&, const Tensor<T>&, double);

IIE_INSTANTIATE(float)
IIE_INSTANTIATE(double)

#undef IIE_INSTANTIATE

}  // namespace iie
