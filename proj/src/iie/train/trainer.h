#pragma once

#include "iie/model/model.h"
#include "iie/train/adamw.h"
#include "iie/train/data.h"
#include "iie/train/lr.h"
#include "iie/train/metrics.h"

namespace iie {

template <class T>
struct TrainResult {
    Model<T> final_model;
    Model<T> best_model;  // lowest validation loss seen
    MetricsLog log;
    double best_val_loss = 0;
    int64_t best_step = 0;
    double final_val_loss = 0;
};

// Mean teacher-forced token cross-entropy over an evaluation slice
// (sequential windows, token-weighted). Perplexity is exp(loss).
template <class T>
double evaluate(const Model<T>& model, const IterationSchedule& schedule,
                const std::vector<uint8_t>& val_bytes, int64_t seq_len, int64_t batch_sequences,
                int64_t max_batches);

// Weight decay applies everywhere except norm gains and solver coefficients.
template <class T>
std::vector<bool> decay_mask(const Model<T>& model);

// Trains the model in place. A non-finite loss aborts with the step index.
template <class T>
TrainResult<T> train_model(Model<T> model, const IterationSchedule& schedule,
                           const TrainConfig& cfg, const std::vector<uint8_t>& train_bytes,
                           const std::vector<uint8_t>& val_bytes);

// Vanilla -> IIET transition: stage 1 pre-trains with an euler/dlcl solver
// under constant_with_warmup; stage 2 inherits all shared parameters, swaps
// in the iie solver with fresh coefficients, resets optimizer moments and
// decays the learning rate by cosine. Logs are merged with stage-2 steps
// offset by stage-1 total_steps.
template <class T>
TrainResult<T> two_stage_train(const ModelConfig& final_cfg, const SolverSpec& stage1_solver,
                               const TrainConfig& stage1, const TrainConfig& stage2,
                               const std::vector<uint8_t>& train_bytes,
                               const std::vector<uint8_t>& val_bytes, uint64_t seed);

// Copies every parameter whose name and shape match (the warm-start path for
// stage transitions and distillation students). Names present in only one
// model are reported through `dropped` / left at their initialization.
template <class T>
void copy_matching_params(const Model<T>& src, Model<T>& dst,
                          std::vector<std::string>* dropped = nullptr);

}  // namespace iie
