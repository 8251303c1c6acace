#pragma once

// Independent vanilla pre-norm residual transformer forward, written as plain
// nested loops over the model's named parameter tensors. This is the oracle
// the all-zero-schedule model forward is compared against (64-bit, scalar
// kernel backend), so the arithmetic conventions are spelled out here:
// ascending-index accumulation, max-subtracted softmax with multiplication by
// the reciprocal sum, and x * (1/(1+exp(-x))) for silu.

#include <cmath>
#include <vector>

#include "iie/model/model.h"

namespace iie::test {

inline std::vector<double> oracle_vanilla_forward(const Model<double>& m,
                                                  const std::vector<int32_t>& tokens, int64_t B,
                                                  int64_t T) {
    const auto& cfg = m.config();
    const int64_t d = cfg.d_model, V = cfg.vocab_size, H = cfg.n_heads, dh = d / H;
    const int64_t N = B * T;
    const double eps = cfg.rms_eps;
    const double scl = 1.0 / std::sqrt(static_cast<double>(dh));

    auto matvec_rows = [&](const std::vector<double>& x, const Tensor<double>& w, int64_t din,
                           int64_t dout) {
        std::vector<double> out(N * dout, 0.0);
        for (int64_t i = 0; i < N; ++i)
            for (int64_t j = 0; j < dout; ++j) {
                double acc = 0;
                for (int64_t k = 0; k < din; ++k) acc += x[i * din + k] * w.data()[k * dout + j];
                out[i * dout + j] = acc;
            }
        return out;
    };
    auto rmsnorm = [&](const std::vector<double>& x, const Tensor<double>& gain) {
        std::vector<double> out(N * d);
        for (int64_t i = 0; i < N; ++i) {
            double ms = 0;
            for (int64_t j = 0; j < d; ++j) ms += x[i * d + j] * x[i * d + j];
            ms /= static_cast<double>(d);
            const double inv = 1.0 / std::sqrt(ms + eps);
            for (int64_t j = 0; j < d; ++j) out[i * d + j] = x[i * d + j] * inv * gain.data()[j];
        }
        return out;
    };
    auto rope_in_place = [&](std::vector<double>& x) {
        for (int64_t b = 0; b < B; ++b)
            for (int64_t t = 0; t < T; ++t)
                for (int64_t h = 0; h < H; ++h) {
                    const int64_t base = (b * T + t) * d + h * dh;
                    for (int64_t p = 0; p < dh / 2; ++p) {
                        const double theta =
                            std::pow(10000.0, -2.0 * static_cast<double>(p) /
                                                  static_cast<double>(dh));
                        const double ang = static_cast<double>(t) * theta;
                        const double c = std::cos(ang), s = std::sin(ang);
                        const double x0 = x[base + 2 * p], x1 = x[base + 2 * p + 1];
                        x[base + 2 * p] = c * x0 - s * x1;
                        x[base + 2 * p + 1] = s * x0 + c * x1;
                    }
                }
    };

    // embedding
    std::vector<double> x(N * d);
    for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < d; ++j)
            x[i * d + j] = m.embedding_table().data()[tokens[i] * d + j];

    for (const auto& lp : m.layers()) {
        // attention block with residual
        std::vector<double> n = rmsnorm(x, lp.attn_norm);
        std::vector<double> q = matvec_rows(n, lp.wq, d, d);
        std::vector<double> k = matvec_rows(n, lp.wk, d, d);
        std::vector<double> v = matvec_rows(n, lp.wv, d, d);
        rope_in_place(q);
        rope_in_place(k);
        std::vector<double> attn(N * d, 0.0);
        std::vector<double> scores;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t i = 0; i < T; ++i) {
                    scores.assign(static_cast<size_t>(i + 1), 0.0);
                    for (int64_t j = 0; j <= i; ++j) {
                        double acc = 0;
                        for (int64_t p = 0; p < dh; ++p)
                            acc += q[(b * T + i) * d + h * dh + p] *
                                   k[(b * T + j) * d + h * dh + p];
                        scores[j] = acc * scl;
                    }
                    double mx = scores[0];
                    for (int64_t j = 1; j <= i; ++j) mx = std::max(mx, scores[j]);
                    for (int64_t j = 0; j <= i; ++j) scores[j] = std::exp(scores[j] - mx);
                    double z = 0;
                    for (int64_t j = 0; j <= i; ++j) z += scores[j];
                    const double inv = 1.0 / z;
                    for (int64_t j = 0; j <= i; ++j) scores[j] *= inv;
                    for (int64_t p = 0; p < dh; ++p) {
                        double acc = 0;
                        for (int64_t j = 0; j <= i; ++j)
                            acc += scores[j] * v[(b * T + j) * d + h * dh + p];
                        attn[(b * T + i) * d + h * dh + p] = acc;
                    }
                }
        std::vector<double> o = matvec_rows(attn, lp.wo, d, d);
        for (int64_t i = 0; i < N * d; ++i) x[i] = x[i] + o[i];

        // ffn block with residual
        n = rmsnorm(x, lp.ffn_norm);
        std::vector<double> g = matvec_rows(n, lp.w_gate, d, cfg.d_ff);
        std::vector<double> u = matvec_rows(n, lp.w_up, d, cfg.d_ff);
        for (int64_t i = 0; i < N * cfg.d_ff; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-g[i]));
            g[i] = (g[i] * s) * u[i];
        }
        std::vector<double> down = matvec_rows(g, lp.w_down, cfg.d_ff, d);
        for (int64_t i = 0; i < N * d; ++i) x[i] = x[i] + down[i];
    }

    std::vector<double> hn = rmsnorm(x, m.final_norm_gain());
    std::vector<double> logits(N * V, 0.0);
    const Tensor<double>& out_w = m.output_table();  // [V, d], used transposed
    for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < V; ++j) {
            double acc = 0;
            for (int64_t p = 0; p < d; ++p) acc += hn[i * d + p] * out_w.data()[j * d + p];
            logits[i * V + j] = acc;
        }
    return logits;
}

}  // namespace iie::test
