#pragma once

#include "iie/train/trainer.h"

namespace iie {

struct DistillConfig {
    double alpha = 1.0;  // MSE weight
    double beta = 1.0;   // KL weight
    double tau = 2.0;    // distillation temperature
    double token_fraction = 1.0 / 3.0;  // share of pre-training tokens to reuse
    TrainConfig train;

    void validate() const {
        if (alpha < 0 || beta < 0) throw config_error("distill: alpha and beta must be >= 0");
        if (tau <= 0) throw config_error("distill: tau must be positive");
        if (token_fraction <= 0 || token_fraction > 1)
            throw config_error("distill: token_fraction must be in (0, 1]");
        train.validate();
    }

    // Step budget from the teacher's pre-training length when the caller did
    // not pin total_steps explicitly.
    int64_t steps_from_fraction(int64_t teacher_steps) const {
        return std::max<int64_t>(1, static_cast<int64_t>(token_fraction *
                                                         static_cast<double>(teacher_steps) + 0.5));
    }
};

template <class T>
struct DistillLossParts {
    double ce = 0, mse = 0, kl = 0, total = 0;
};

// Warm start: student inherits every parameter whose name and shape match;
// solver coefficients that do not apply to the student architecture are
// dropped (reported via `dropped`). Config may differ only in the solver.
template <class T>
Model<T> warm_start(const Model<T>& teacher, const ModelConfig& student_cfg,
                    std::vector<std::string>* dropped = nullptr);

// L_total = L_CE + alpha * L_MSE + beta * L_KL, built in-graph from the two
// traces (teacher trace detached). L_MSE averages squared L2 norms of the
// per-layer hidden-state differences over the layer count.
template <class T>
Tensor<T> distill_loss(const ForwardTrace<T>& teacher_trace, const ForwardTrace<T>& student_trace,
                       const std::vector<int32_t>& targets, const DistillConfig& cfg,
                       DistillLossParts<T>* parts = nullptr);

template <class T>
struct DistillResult {
    Model<T> student;
    MetricsLog log;
    double warmstart_val_loss = 0;  // student evaluation before any update
    double final_val_loss = 0;
};

// Continued pre-training with the combined objective. The teacher runs in
// inference mode each step and is never updated.
template <class T>
DistillResult<T> distill(const Model<T>& teacher, const IterationSchedule& teacher_schedule,
                         const ModelConfig& student_cfg, const IterationSchedule& student_schedule,
                         const DistillConfig& cfg, const std::vector<uint8_t>& train_bytes,
                         const std::vector<uint8_t>& val_bytes);

// Baseline: distill a PC-solver teacher into a plain Euler student.
template <class T>
DistillResult<T> distil_pcformer_baseline(const Model<T>& pc_teacher, const DistillConfig& cfg,
                                          const std::vector<uint8_t>& train_bytes,
                                          const std::vector<uint8_t>& val_bytes);

}  // namespace iie
