#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iie/solver/solver_spec.h"

namespace iie {

enum class SolverSite { per_sub_block, per_layer };

const char* solver_site_name(SolverSite s);
SolverSite solver_site_from(const std::string& s);

struct ModelConfig {
    int64_t vocab_size = 256;
    int64_t d_model = 64;
    int n_layers = 4;
    int n_heads = 4;
    int64_t d_ff = 176;
    int64_t max_seq_len = 128;
    bool tie_embeddings = true;
    double rms_eps = 1e-6;
    SolverSpec solver;
    SolverSite solver_site = SolverSite::per_sub_block;

    int sub_block_count() const {
        return n_layers * (solver_site == SolverSite::per_layer ? 1 : 2);
    }

    void validate() const;
};

// Per-sub-block refinement counts r_n. Length always equals the model's
// sub-block count; nonzero entries are only legal for the iie solver.
struct IterationSchedule {
    std::vector<int> r;

    static IterationSchedule uniform(int sub_blocks, int iterations) {
        IterationSchedule s;
        s.r.assign(static_cast<size_t>(sub_blocks), iterations);
        return s;
    }
    static IterationSchedule zeros(int sub_blocks) { return uniform(sub_blocks, 0); }

    // Default schedule for a config: solver.iterations everywhere (iie), else zeros.
    static IterationSchedule full(const ModelConfig& cfg) {
        return uniform(cfg.sub_block_count(),
                       cfg.solver.kind == SolverKind::iie ? cfg.solver.iterations : 0);
    }

    int64_t size() const { return static_cast<int64_t>(r.size()); }
    int64_t total_iterations() const {
        int64_t t = 0;
        for (int v : r) t += v;
        return t;
    }

    void validate(const ModelConfig& cfg) const;
};

}  // namespace iie
