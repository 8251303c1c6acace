#include "iie/model/flops.h"

namespace iie {

int64_t count_block_evals(const ModelConfig& cfg, const IterationSchedule& schedule) {
    schedule.validate(cfg);
    const int64_t sb = cfg.sub_block_count();
    switch (cfg.solver.kind) {
        case SolverKind::euler:
        case SolverKind::dlcl: return sb;
        case SolverKind::rk: return sb * cfg.solver.order;
        case SolverKind::pc: return sb * (cfg.solver.order + 1);
        case SolverKind::iie: return sb + schedule.total_iterations();
    }
    return sb;
}

FlopsEstimate flops_estimate(const ModelConfig& cfg, const IterationSchedule& schedule,
                             int64_t ctx_len) {
    schedule.validate(cfg);
    const double d = static_cast<double>(cfg.d_model);
    const double ff = static_cast<double>(cfg.d_ff);
    const double v = static_cast<double>(cfg.vocab_size);
    const double ctx = static_cast<double>(ctx_len);

    // per-token branch evaluation costs (2 FLOPs per multiply-accumulate)
    const double norm_cost = 4.0 * d;
    const double attn_cost = norm_cost + 8.0 * d * d + 3.0 * d /*rope*/ + 4.0 * ctx * d;
    const double ffn_cost = norm_cost + 6.0 * d * ff + ff /*gate mul*/;
    const double layer_cost = attn_cost + ffn_cost;  // per-layer site evaluates both branches

    const int sb_count = cfg.sub_block_count();
    const bool per_layer = cfg.solver_site == SolverSite::per_layer;

    FlopsEstimate e;
    auto merge_cost = [&](int64_t entries) { return 2.0 * d * static_cast<double>(entries + 1); };

    for (int n = 0; n < sb_count; ++n) {
        double evals = 1, merges = 0;
        switch (cfg.solver.kind) {
            case SolverKind::euler:
                evals = 1;
                merges = 2.0 * d;  // plain residual add
                break;
            case SolverKind::dlcl:
                evals = 1;
                merges = merge_cost(n + 1);
                break;
            case SolverKind::iie:
                evals = 1 + schedule.r[n];
                merges = (1 + schedule.r[n]) * merge_cost(n + 1);
                break;
            case SolverKind::rk: {
                const int o = cfg.solver.order;
                evals = o;
                // stage offsets for i = 2..o plus the gamma combination
                double m = merge_cost(o);
                for (int i = 2; i <= o; ++i) m += merge_cost(i - 1);
                merges = m;
                break;
            }
            case SolverKind::pc: {
                const int o = cfg.solver.order;
                evals = o + 1;
                double m = merge_cost(o);  // EMA predictor combine
                for (int i = 2; i <= o; ++i) m += merge_cost(i - 1);
                m += merge_cost(1) + merge_cost(3);  // corrector terms
                merges = m;
                break;
            }
        }
        if (per_layer) {
            e.attn_evals += evals * attn_cost;
            e.ffn_evals += evals * (layer_cost - attn_cost);
        } else {
            // even sub-blocks are attention branches, odd ones FFN
            if (n % 2 == 0)
                e.attn_evals += evals * attn_cost;
            else
                e.ffn_evals += evals * ffn_cost;
        }
        e.merges += merges;
    }
    e.head = norm_cost + 2.0 * v * d;
    e.total = e.attn_evals + e.ffn_evals + e.merges + e.head;
    return e;
}

}  // namespace iie
