#pragma once

#include "iie/model/model.h"

namespace iie {

// Autoregressive decoding with committed-KV semantics: cached keys/values of
// past positions come from the final committed iteration of their sub-block;
// the current token's K/V are recomputed on every block-function evaluation
// and committed once its sub-block finishes iterating.
template <class T>
class DecodeSession {
public:
    DecodeSession(const Model<T>& model, const IterationSchedule& schedule);

    void reset();

    // Feeds the token at the next position; returns the logits row [V]
    // predicting the following token.
    std::vector<T> step(int32_t token);

    int64_t position() const { return pos_; }

private:
    const Model<T>& model_;
    IterationSchedule schedule_;
    int64_t pos_ = 0;
    // one cache slot per layer (attention site), row-major [pos, d_model]
    std::vector<std::vector<T>> kcache_, vcache_;
    std::vector<std::vector<T>> pending_k_, pending_v_;

    Tensor<T> attended(const Tensor<T>& y, int layer);
};

template <class T>
std::vector<int32_t> greedy_decode(const Model<T>& model, const IterationSchedule& schedule,
                                   const std::vector<int32_t>& prompt, int gen_len);

struct BenchResult {
    double tokens_per_sec = 0;  // median over runs
    double evals_per_token = 0;
    int runs = 0;
    int prompt_len = 0;
    int gen_len = 0;
};

template <class T>
BenchResult benchmark_decode(const Model<T>& model, const IterationSchedule& schedule,
                             int prompt_len, int gen_len, int runs, uint64_t seed);

}  // namespace iie
