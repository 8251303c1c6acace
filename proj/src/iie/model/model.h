#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iie/core/ops.h"
#include "iie/model/config.h"
#include "iie/solver/integrators.h"

namespace iie {

// Captured intermediate states of one forward pass, recorded on request.
// iterates[n] holds the r_n + 1 successive estimates of sub-block n
// (initial estimate first); layer_outputs are the post-FFN hidden states.
template <class T>
struct ForwardTrace {
    Tensor<T> embed_out;
    std::vector<Tensor<T>> subblock_inputs;
    std::vector<std::vector<Tensor<T>>> iterates;
    std::vector<Tensor<T>> layer_outputs;
    Tensor<T> logits;  // [B*T, V]
};

// Decoder-only byte LM in the LLaMA shape: per layer a causal-attention
// branch and a SiLU-gated FFN branch, RMS pre-norms, rotary positions, with
// the residual update supplied by the configured solver. Changing the
// iteration schedule never changes any parameter shape.
template <class T>
class Model {
public:
    struct LayerParams {
        Tensor<T> attn_norm, wq, wk, wv, wo;
        Tensor<T> ffn_norm, w_gate, w_up, w_down;
    };

    Model() = default;  // undefined model; assign from init/zeros/clone before use

    static Model init(const ModelConfig& cfg, uint64_t seed);

    // All-zero parameters (checkpoint loading target).
    static Model zeros(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }

    // Ordered, named parameter registry (deterministic order).
    const std::vector<std::pair<std::string, Tensor<T>>>& named_params() const { return named_; }
    std::vector<Tensor<T>> params() const;
    Tensor<T> param(const std::string& name) const;  // throws if absent
    bool has_param(const std::string& name) const;

    int64_t param_count() const;
    void set_requires_grad(bool rg);
    void zero_grads();

    Model clone() const;

    // Teacher-forced forward over a [B, T] token batch (flattened row-major).
    // Returns logits [B*T, V]. The schedule must match the sub-block count.
    Tensor<T> forward(const std::vector<int32_t>& tokens, int64_t batch, int64_t seq_len,
                      const IterationSchedule& schedule, ForwardTrace<T>* trace = nullptr) const;

    const std::vector<LayerParams>& layers() const { return layers_; }
    const Tensor<T>& embedding_table() const { return embed_; }
    const Tensor<T>& output_table() const { return cfg_.tie_embeddings ? embed_ : lm_head_; }
    const Tensor<T>& final_norm_gain() const { return final_norm_; }
    const std::vector<SolverCoeffs<T>>& solver_coeffs() const { return solver_; }
    std::vector<SolverCoeffs<T>>& solver_coeffs() { return solver_; }

    // Residual branches (vector fields). For per-layer granularity the whole
    // decoder layer is one field: F(y) = a + ffn_branch(y + a), a = attn_branch(y).
    Tensor<T> attn_branch(const Tensor<T>& y, const LayerParams& lp,
                          const std::vector<int32_t>& positions) const;
    Tensor<T> ffn_branch(const Tensor<T>& y, const LayerParams& lp) const;

private:
    void register_params();

    ModelConfig cfg_;
    Tensor<T> embed_;
    std::vector<LayerParams> layers_;
    Tensor<T> final_norm_;
    Tensor<T> lm_head_;  // undefined when tied
    std::vector<SolverCoeffs<T>> solver_;
    std::vector<std::pair<std::string, Tensor<T>>> named_;
};

}  // namespace iie
