#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iie {

struct MetricsRow {
    int64_t step = 0;
    std::string split;  // "train" | "val"
    double loss = 0;
    double ppl = 0;
    double lr = 0;
    double grad_norm = 0;
    // distillation components (present when has_components)
    bool has_components = false;
    double loss_ce = 0, loss_mse = 0, loss_kl = 0;
};

// Append-only training/eval log. CSV schema:
//   step,split,loss,ppl,lr,grad_norm[,loss_ce,loss_mse,loss_kl]
class MetricsLog {
public:
    void add(MetricsRow row) { rows_.push_back(std::move(row)); }
    const std::vector<MetricsRow>& rows() const { return rows_; }

    // Appends another log with its steps shifted by `step_offset`.
    void merge(const MetricsLog& other, int64_t step_offset);

    std::string to_csv() const;
    void write_csv(const std::string& path) const;

    // Last validation loss, NaN when absent.
    double last_val_loss() const;

private:
    bool any_components() const;
    std::vector<MetricsRow> rows_;
};

uint64_t fnv1a64(const void* data, size_t len);

}  // namespace iie
