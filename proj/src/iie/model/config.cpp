#include "iie/model/config.h"

namespace iie {

const char* solver_site_name(SolverSite s) {
    return s == SolverSite::per_layer ? "per_layer" : "per_sub_block";
}

SolverSite solver_site_from(const std::string& s) {
    if (s == "per_sub_block") return SolverSite::per_sub_block;
    if (s == "per_layer") return SolverSite::per_layer;
    throw config_error("unknown solver_site '" + s + "' (per_sub_block|per_layer)");
}

void ModelConfig::validate() const {
    if (vocab_size < 1) throw config_error("model.vocab_size must be positive");
    if (d_model < 1) throw config_error("model.d_model must be positive");
    if (n_layers < 1) throw config_error("model.n_layers must be positive");
    if (n_heads < 1) throw config_error("model.n_heads must be positive");
    if (d_ff < 1) throw config_error("model.d_ff must be positive");
    if (max_seq_len < 1) throw config_error("model.max_seq_len must be positive");
    if (d_model % n_heads != 0)
        throw config_error("model.d_model (" + std::to_string(d_model) +
                           ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    if ((d_model / n_heads) % 2 != 0)
        throw config_error("model head dimension " + std::to_string(d_model / n_heads) +
                           " must be even for rotary positions");
    if (rms_eps <= 0) throw config_error("model.rms_eps must be positive");
    solver.validate();
}

void IterationSchedule::validate(const ModelConfig& cfg) const {
    if (size() != cfg.sub_block_count())
        throw config_error("schedule length " + std::to_string(size()) + " does not match " +
                           std::to_string(cfg.sub_block_count()) + " sub-blocks");
    const int rmax = cfg.solver.kind == SolverKind::iie ? cfg.solver.iterations : 0;
    for (size_t i = 0; i < r.size(); ++i) {
        if (r[i] < 0)
            throw config_error("schedule[" + std::to_string(i) + "] is negative");
        if (r[i] > rmax)
            throw config_error("schedule[" + std::to_string(i) + "] = " + std::to_string(r[i]) +
                               " exceeds the configured maximum r = " + std::to_string(rmax));
    }
}

}  // namespace iie
