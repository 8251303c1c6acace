#pragma once

#include <cstdint>
#include <string>

#include "iie/util/errors.h"

namespace iie {

enum class LrSchedule { cosine, constant_with_warmup };

const char* lr_schedule_name(LrSchedule s);
LrSchedule lr_schedule_from(const std::string& s);

enum class Precision { f32, f64 };

struct TrainConfig {
    double max_lr = 3e-4;
    double warmup_ratio = 0.01;
    int64_t warmup_steps = -1;  // overrides warmup_ratio when >= 0
    LrSchedule schedule = LrSchedule::cosine;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    int64_t batch_tokens = 1024;  // tokens per step; sequences = batch_tokens / seq_len
    int64_t total_steps = 2000;
    int64_t seq_len = 128;
    uint64_t seed = 1;
    int64_t eval_every = 200;
    int64_t eval_max_batches = 50;
    Precision precision = Precision::f32;

    int64_t effective_warmup() const {
        if (warmup_steps >= 0) return warmup_steps;
        return static_cast<int64_t>(warmup_ratio * static_cast<double>(total_steps) + 0.5);
    }
    int64_t batch_sequences() const { return batch_tokens / seq_len; }

    void validate() const;
};

// Linear ramp 0 -> max_lr over the warmup, then cosine decay to 0 at
// total_steps (or flat max_lr in constant mode).
double lr_at(int64_t step, const TrainConfig& cfg);

}  // namespace iie
