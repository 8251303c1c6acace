#pragma once

#include <cmath>
#include <vector>

#include "iie/core/tensor.h"
#include "iie/model/config.h"
#include "iie/util/rng.h"

namespace iie::test {

template <class T>
Tensor<T> random_tensor(Rng& rng, const Shape& shape, double scale = 1.0) {
    Tensor<T> t = Tensor<T>::zeros(shape);
    for (int64_t i = 0; i < t.numel(); ++i)
        t.data()[i] = static_cast<T>(rng.normal(0.0, scale));
    return t;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) -
                                 static_cast<double>(b.data()[i])));
    return m;
}

// Tiny config for gradient checks and structural tests.
inline ModelConfig tiny_config(SolverSpec solver = SolverSpec::iie(3)) {
    ModelConfig cfg;
    cfg.vocab_size = 32;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 44;
    cfg.max_seq_len = 16;
    cfg.tie_embeddings = true;
    cfg.solver = solver;
    return cfg;
}

// The desk-scale reference config used by the training comparisons.
inline ModelConfig micro_config(SolverSpec solver) {
    ModelConfig cfg;
    cfg.vocab_size = 256;
    cfg.d_model = 64;
    cfg.n_layers = 4;
    cfg.n_heads = 4;
    cfg.d_ff = 176;
    cfg.max_seq_len = 128;
    cfg.tie_embeddings = true;
    cfg.solver = solver;
    return cfg;
}

inline std::vector<int32_t> random_tokens(Rng& rng, int64_t n, int64_t vocab) {
    std::vector<int32_t> t(static_cast<size_t>(n));
    for (auto& v : t) v = static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(vocab)));
    return t;
}

// Synthetic training corpus with byte-level structure a tiny LM can learn:
// nested arithmetic-progression text patterns, deterministic from the seed.
inline std::vector<uint8_t> synthetic_corpus(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<uint8_t> out;
    out.reserve(n);
    static const char* words[] = {"the", "euler", "implicit", "iteration", "residual", "stack",
                                  "layer", "fixed", "point", "solver", "refine", "hidden"};
    while (out.size() < n) {
        const int w = static_cast<int>(rng.uniform_int(12));
        for (const char* p = words[w]; *p; ++p) out.push_back(static_cast<uint8_t>(*p));
        out.push_back(rng.uniform_int(12) == 0 ? '\n' : ' ');
    }
    out.resize(n);
    return out;
}

}  // namespace iie::test
