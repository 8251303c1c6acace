#pragma once

#include <string>
#include <vector>

#include "iie/model/model.h"

namespace iie {

// Influence values are 1 - E[cosine similarity] between hidden-state rows,
// pooled over all sampled sequences and token positions, so every value
// lands in [0, 2]. block_bi measures whole decoder layers (input vs output);
// iter_influence measures each sub-block's internal refinement chain:
// column 0 is input -> initial estimate, column i is estimate i-1 -> i.
struct InfluenceReport {
    std::vector<double> block_bi;                     // per layer
    std::vector<std::vector<double>> iter_influence;  // per sub-block, width 1 + r_n
    int64_t sample_count = 0;
    int64_t skipped_rows = 0;  // zero-norm rows excluded from the expectation
    std::string config_digest;

    void validate_range() const;  // throws if any value leaves [0, 2]
};

template <class T>
InfluenceReport compute_influence(const Model<T>& model, const IterationSchedule& schedule,
                                  const std::vector<uint8_t>& corpus, int n_samples,
                                  int64_t seq_len, uint64_t seed);

// Per-layer block influence only (BI_i = 1 - E cos(H_i, H_{i+1})).
template <class T>
std::vector<double> block_influence(const Model<T>& model, const IterationSchedule& schedule,
                                    const std::vector<uint8_t>& corpus, int n_samples,
                                    int64_t seq_len, uint64_t seed);

// The building block: 1 - mean row-wise cosine between two equally shaped
// hidden-state tensors with trailing dimension d. Zero-norm rows are skipped
// (and counted through `skipped`).
template <class T>
double rowwise_influence(const Tensor<T>& a, const Tensor<T>& b, int64_t d,
                         int64_t* skipped = nullptr);

enum class ScheduleMode { lower_bound, threshold, budget };

ScheduleMode schedule_mode_from(const std::string& s);

// lower_bound: r_n = 0 everywhere. threshold: tau* = min over sub-blocks of
// the column-0 influence (or each sub-block's own column 0 when
// per_block_threshold); keep the maximal prefix of iterations with influence
// >= tau*. budget(K): greedily keep the K highest-influence iterations whose
// predecessors are already kept, ties broken by (lower sub-block, lower
// iteration). An iteration is only meaningful if all earlier iterations in
// its sub-block run, hence the prefix rule throughout.
IterationSchedule derive_schedule(const InfluenceReport& report, ScheduleMode mode,
                                  int64_t budget = 0, bool per_block_threshold = false);

// CSV rows `sub_block,iteration,influence` (9 significant digits).
void export_heatmap(const InfluenceReport& report, const std::string& path);
std::string heatmap_csv(const InfluenceReport& report);
std::vector<std::vector<double>> parse_heatmap_csv(const std::string& text);

// Single structured-text (JSON) document for the whole report.
std::string report_to_json(const InfluenceReport& report);
InfluenceReport report_from_json(const std::string& text);

}  // namespace iie
