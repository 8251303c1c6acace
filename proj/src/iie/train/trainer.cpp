#include "iie/train/trainer.h"

#include <cmath>

namespace iie {

template <class T>
double evaluate(const Model<T>& model, const IterationSchedule& schedule,
                const std::vector<uint8_t>& val_bytes, int64_t seq_len, int64_t batch_sequences,
                int64_t max_batches) {
    const auto batches = eval_batches(val_bytes, seq_len, batch_sequences, max_batches);
    double loss_sum = 0;
    int64_t tokens = 0;
    for (const Batch& b : batches) {
        Tensor<T> logits = model.forward(b.inputs, b.batch, b.seq_len, schedule);
        Tensor<T> loss = softmax_cross_entropy(logits, b.targets);
        const int64_t n = b.batch * b.seq_len;
        loss_sum += static_cast<double>(loss.item()) * static_cast<double>(n);
        tokens += n;
    }
    return loss_sum / static_cast<double>(tokens);
}

template <class T>
std::vector<bool> decay_mask(const Model<T>& model) {
    std::vector<bool> mask;
    for (const auto& [name, t] : model.named_params()) {
        const bool is_norm = name.find("norm") != std::string::npos;
        const bool is_solver = name.rfind("solver.", 0) == 0;
        mask.push_back(!is_norm && !is_solver);
    }
    return mask;
}

template <class T>
TrainResult<T> train_model(Model<T> model, const IterationSchedule& schedule,
                           const TrainConfig& cfg, const std::vector<uint8_t>& train_bytes,
                           const std::vector<uint8_t>& val_bytes) {
    cfg.validate();
    schedule.validate(model.config());

    AdamW<T> opt(model.params(), decay_mask(model));
    opt.zero_grad();
    BatchStream stream(train_bytes, cfg.seq_len, cfg.batch_sequences(), cfg.seed);

    TrainResult<T> result;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    // full finite scans off in the hot loop; the loss is checked every step
    const bool checks_were_on = finite_checks();
    if (cfg.precision == Precision::f32) set_finite_checks(false);

    auto run_eval = [&](int64_t at_step) {
        const double vl = evaluate(model, schedule, val_bytes, cfg.seq_len,
                                   cfg.batch_sequences(), cfg.eval_max_batches);
        MetricsRow row;
        row.step = at_step;
        row.split = "val";
        row.loss = vl;
        row.ppl = std::exp(vl);
        row.lr = lr_at(std::min(at_step, cfg.total_steps), cfg);
        result.log.add(row);
        if (vl < result.best_val_loss) {
            result.best_val_loss = vl;
            result.best_step = at_step;
            result.best_model = model.clone();
        }
        return vl;
    };

    for (int64_t step = 0; step < cfg.total_steps; ++step) {
        const Batch b = stream.next();
        double loss_value = 0;
        {
            Graph<T> tape;
            Tensor<T> logits = model.forward(b.inputs, b.batch, b.seq_len, schedule);
            Tensor<T> loss = softmax_cross_entropy(logits, b.targets);
            loss_value = static_cast<double>(loss.item());
            if (!std::isfinite(loss_value)) {
                set_finite_checks(checks_were_on);
                throw divergence_error("non-finite training loss at step " + std::to_string(step));
            }
            tape.backward(loss);
        }
        const double gnorm = opt.clip_grad_norm(cfg.grad_clip);
        const double lr = lr_at(step, cfg);
        opt.step(lr, cfg.weight_decay);
        opt.zero_grad();

        MetricsRow row;
        row.step = step;
        row.split = "train";
        row.loss = loss_value;
        row.ppl = std::exp(loss_value);
        row.lr = lr;
        row.grad_norm = gnorm;
        result.log.add(row);

        if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 && step + 1 < cfg.total_steps)
            run_eval(step + 1);
    }
    result.final_val_loss = run_eval(cfg.total_steps);
    set_finite_checks(checks_were_on);
    result.final_model = model;
    return result;
}

template <class T>
void copy_matching_params(const Model<T>& src, Model<T>& dst, std::vector<std::string>* dropped) {
    for (const auto& [name, t] : src.named_params()) {
        if (dst.has_param(name)) {
            Tensor<T> d = dst.param(name);
            if (d.shape() != t.shape())
                throw shape_error("warm start: parameter '" + name + "' has shape " +
                                  shape_str(t.shape()) + " in source but " + shape_str(d.shape()) +
                                  " in destination");
            d.vec() = t.vec();
        } else if (dropped) {
            dropped->push_back(name);
        }
    }
}

template <class T>
TrainResult<T> two_stage_train(const ModelConfig& final_cfg, const SolverSpec& stage1_solver,
                               const TrainConfig& stage1, const TrainConfig& stage2,
                               const std::vector<uint8_t>& train_bytes,
                               const std::vector<uint8_t>& val_bytes, uint64_t seed) {
    if (stage1_solver.kind != SolverKind::euler && stage1_solver.kind != SolverKind::dlcl)
        throw config_error("two-stage: stage-1 solver must be euler or dlcl");
    if (stage1.schedule != LrSchedule::constant_with_warmup)
        throw config_error("two-stage: stage-1 requires the constant_with_warmup schedule");
    if (stage2.schedule != LrSchedule::cosine)
        throw config_error("two-stage: stage-2 requires the cosine schedule");
    if (final_cfg.solver.kind != SolverKind::iie)
        throw config_error("two-stage: the final solver must be iie");

    ModelConfig cfg1 = final_cfg;
    cfg1.solver = stage1_solver;
    Model<T> m1 = Model<T>::init(cfg1, seed);
    TrainResult<T> r1 =
        train_model(m1, IterationSchedule::full(cfg1), stage1, train_bytes, val_bytes);

    // architectural transition: inherit parameters, fresh solver coefficients
    Model<T> m2 = Model<T>::init(final_cfg, seed);
    copy_matching_params(r1.final_model, m2);
    TrainResult<T> r2 =
        train_model(m2, IterationSchedule::full(final_cfg), stage2, train_bytes, val_bytes);

    TrainResult<T> out;
    out.final_model = r2.final_model;
    out.best_model = r2.best_model;
    out.best_val_loss = r2.best_val_loss;
    out.best_step = stage1.total_steps + r2.best_step;
    out.final_val_loss = r2.final_val_loss;
    out.log = r1.log;
    out.log.merge(r2.log, stage1.total_steps);
    return out;
}

#define IIE_INSTANTIATE(T)                                                                       \
    template double evaluate(const Model<T>&, const IterationSchedule&,                          \
                             const std::vector<uint8_t>&, int64_t, int64_t, int64_t);            \
    template std::vector<bool> decay_mask(const Model<T>&);                                      \
    template TrainResult<T> train_model(Model<T>, const IterationSchedule&, const TrainConfig&,  \
                                        const std::vector<uint8_t>&, const std::vector<uint8_t>&); \
    template void copy_matching_params(const Model<T>&, Model<T>&, std::vector<std::string>*);   \
    template TrainResult<T> two_stage_train(const ModelConfig&, const SolverSpec&,               \
                                            const TrainConfig&, const TrainConfig&,              \
                                            const std::vector<uint8_t>&,                         \
                                            const std::vector<uint8_t>&, uint64_t);

IIE_INSTANTIATE(float)
IIE_INSTANTIATE(double)

#undef IIE_INSTANTIATE

}  // namespace iie
