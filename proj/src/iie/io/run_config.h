#pragma once

#include <optional>
#include <string>

#include "iie/distill/distill.h"
#include "iie/model/config.h"
#include "iie/train/lr.h"

namespace iie {

struct DataConfig {
    std::string corpus;
    double train_fraction = 0.9;
};

// One structured-text document drives a run. Parsing is strict: any key the
// schema does not know is rejected by its dotted path before compute starts,
// and the fully resolved document is written beside every run's outputs.
struct RunConfig {
    uint64_t seed = 1;
    ModelConfig model;
    TrainConfig train;
    DataConfig data;

    // two-stage training (present when train.stage2 given)
    bool two_stage = false;
    TrainConfig stage2;
    SolverSpec stage1_solver = SolverSpec::euler();

    bool has_distill = false;
    DistillConfig distill;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Fully-resolved round-trippable document.
std::string run_config_to_json(const RunConfig& cfg);

const char* precision_name(Precision p);
Precision precision_from(const std::string& s);

// Canonical digest of a resolved config (ties reports to the run).
std::string config_digest(const RunConfig& cfg);

// Schedule file helpers (JSON array of per-sub-block iteration counts).
IterationSchedule load_schedule(const std::string& path);
void save_schedule(const IterationSchedule& s, const std::string& path);

}  // namespace iie
