#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iie/core/graph.h"
#include "iie/core/tensor.h"

namespace iie {

// Differentiable operator set: exactly what the model and its losses need.
// Each op computes forward via the active kernel table and, when a Graph is
// live and an input requires grad, appends its backward closure to the tape.

// When enabled, every op asserts its output is finite (NaN/Inf is surfaced as
// an error instead of being stored). On by default; the f32 training loop
// turns it off for speed and checks the loss instead.
void set_finite_checks(bool on);
bool finite_checks();

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <class T>
Tensor<T> scale(const Tensor<T>& a, double c);

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

// 2-D contraction with optional operand transposes. Backward:
// dA = dC*B^T, dB = A^T*dC (adjusted for the transpose flags).
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false,
                 bool trans_b = false);

// Row gather: out[i] = table[ids[i]]; backward scatter-adds.
template <class T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int32_t>& ids);

// Rotary positions over [B,T,D] with n_heads heads; adjacent-pair rotation,
// base 10000, angle = position * base^(-2p/head_dim).
template <class T>
Tensor<T> rope(const Tensor<T>& x, int n_heads, const std::vector<int32_t>& positions);

// Fused causal multi-head attention over [B,T,D] q/k/v (post-RoPE). Scores
// are scaled by 1/sqrt(head_dim) and masked strictly causally.
template <class T>
Tensor<T> causal_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int n_heads);

// x / sqrt(mean(x^2) + eps) * gain over trailing vectors of length gain.numel().
template <class T>
Tensor<T> rms_norm(const Tensor<T>& x, const Tensor<T>& gain, double eps);

template <class T>
Tensor<T> silu(const Tensor<T>& x);

// base + sum_j coefs[j] * xs[j]; coefs is a tensor of length xs.size() so
// merge/stage coefficients stay learnable.
template <class T>
Tensor<T> weighted_sum(const Tensor<T>& base, std::span<const Tensor<T>> xs,
                       const Tensor<T>& coefs);

template <class T>
Tensor<T> add_list(std::span<const Tensor<T>> xs);

// EMA stage weights w_i = gamma*(1-gamma)^(o-i) for i = 1..o, as a length-o
// tensor differentiable in the scalar gamma.
template <class T>
Tensor<T> ema_weights(const Tensor<T>& gamma, int order);

template <class T>
Tensor<T> sum(const Tensor<T>& x);

// Mean over rows of -log softmax(logits)[target]; max-subtraction stabilized.
template <class T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int32_t>& targets);

// Mean over the leading index of squared L2 norms of row differences.
template <class T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b);

// Mean over rows of KL(softmax(teacher/tau) || softmax(student/tau)), in
// log space; gradient flows to the student only.
template <class T>
Tensor<T> kl_temperature(const Tensor<T>& teacher, const Tensor<T>& student, double tau);

}  // namespace iie
