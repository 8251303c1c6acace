#pragma once

#include "iie/model/config.h"

namespace iie {

// Per-token count of block-function evaluations implied by the solver and
// schedule: sum_n (1 + r_n) for the iie family (so full r=3 costs exactly 4x
// the zero schedule), o per sub-block for rk, o+1 for pc.
int64_t count_block_evals(const ModelConfig& cfg, const IterationSchedule& schedule);

// Dense-op FLOP estimate per token at context length ctx_len. Attention and
// FFN branch evaluations are costed separately; history merges as vector ops.
struct FlopsEstimate {
    double attn_evals = 0;    // FLOPs spent in attention-branch evaluations
    double ffn_evals = 0;     // FLOPs spent in FFN-branch evaluations
    double merges = 0;        // history-merge vector work
    double head = 0;          // final norm + logits
    double total = 0;
};

FlopsEstimate flops_estimate(const ModelConfig& cfg, const IterationSchedule& schedule,
                             int64_t ctx_len);

}  // namespace iie
