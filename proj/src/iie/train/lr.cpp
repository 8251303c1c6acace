#include "iie/train/lr.h"

#include <cmath>

namespace iie {

const char* lr_schedule_name(LrSchedule s) {
    return s == LrSchedule::cosine ? "cosine" : "constant_with_warmup";
}

LrSchedule lr_schedule_from(const std::string& s) {
    if (s == "cosine") return LrSchedule::cosine;
    if (s == "constant_with_warmup") return LrSchedule::constant_with_warmup;
    throw config_error("unknown lr schedule '" + s + "' (cosine|constant_with_warmup)");
}

void TrainConfig::validate() const {
    if (max_lr <= 0) throw config_error("train.max_lr must be positive");
    if (total_steps < 1) throw config_error("train.total_steps must be positive");
    if (seq_len < 1) throw config_error("train.seq_len must be positive");
    if (batch_tokens < 1) throw config_error("train.batch_tokens must be positive");
    if (batch_tokens % seq_len != 0)
        throw config_error("train.batch_tokens (" + std::to_string(batch_tokens) +
                           ") must be a multiple of seq_len (" + std::to_string(seq_len) + ")");
    if (weight_decay < 0) throw config_error("train.weight_decay must be >= 0");
    if (grad_clip <= 0) throw config_error("train.grad_clip must be positive");
    if (warmup_ratio < 0 || warmup_ratio >= 1)
        throw config_error("train.warmup_ratio must be in [0,1)");
    if (effective_warmup() >= total_steps)
        throw config_error("warmup (" + std::to_string(effective_warmup()) +
                           " steps) must be shorter than total_steps");
}

double lr_at(int64_t step, const TrainConfig& cfg) {
    if (step < 0 || step > cfg.total_steps)
        throw param_error("lr_at: step " + std::to_string(step) + " outside [0, total_steps]");
    const int64_t warm = cfg.effective_warmup();
    if (warm > 0 && step < warm)
        return cfg.max_lr * static_cast<double>(step) / static_cast<double>(warm);
    if (cfg.schedule == LrSchedule::constant_with_warmup) return cfg.max_lr;
    const double progress =
        static_cast<double>(step - warm) / static_cast<double>(cfg.total_steps - warm);
    return cfg.max_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace iie
