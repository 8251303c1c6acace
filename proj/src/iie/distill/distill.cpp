#include "iie/distill/distill.h"

#include <cmath>

namespace iie {

namespace {

void check_compatible(const ModelConfig& a, const ModelConfig& b) {
    if (a.vocab_size != b.vocab_size || a.d_model != b.d_model || a.n_layers != b.n_layers ||
        a.n_heads != b.n_heads || a.d_ff != b.d_ff || a.max_seq_len != b.max_seq_len ||
        a.tie_embeddings != b.tie_embeddings || a.solver_site != b.solver_site)
        throw config_error("distill: teacher and student configs may differ only in the solver");
}

}  // namespace

template <class T>
Model<T> warm_start(const Model<T>& teacher, const ModelConfig& student_cfg,
                    std::vector<std::string>* dropped) {
    check_compatible(teacher.config(), student_cfg);
    Model<T> student = Model<T>::init(student_cfg, 0);  // coefficients at defaults
    copy_matching_params(teacher, student, dropped);
    return student;
}

template <class T>
Tensor<T> distill_loss(const ForwardTrace<T>& teacher_trace, const ForwardTrace<T>& student_trace,
                       const std::vector<int32_t>& targets, const DistillConfig& cfg,
                       DistillLossParts<T>* parts) {
    const size_t n_layers = teacher_trace.layer_outputs.size();
    if (student_trace.layer_outputs.size() != n_layers)
        throw shape_error("distill: trace layer counts differ (" + std::to_string(n_layers) +
                          " vs " + std::to_string(student_trace.layer_outputs.size()) + ")");

    Tensor<T> ce = softmax_cross_entropy(student_trace.logits, targets);

    // per-block squared L2 norms of hidden-state differences, averaged over blocks
    std::vector<Tensor<T>> terms;
    terms.reserve(n_layers);
    for (size_t i = 0; i < n_layers; ++i) {
        const Tensor<T>& hs = student_trace.layer_outputs[i];
        const Tensor<T>& ht = teacher_trace.layer_outputs[i];
        terms.push_back(mse(hs.reshape({1, hs.numel()}), ht.reshape({1, ht.numel()})));
    }
    Tensor<T> mse_loss =
        scale(add_list(std::span<const Tensor<T>>(terms)), 1.0 / static_cast<double>(n_layers));

    Tensor<T> kl = kl_temperature(teacher_trace.logits, student_trace.logits, cfg.tau);

    Tensor<T> total = add(ce, add(scale(mse_loss, cfg.alpha), scale(kl, cfg.beta)));
    if (parts) {
        parts->ce = static_cast<double>(ce.item());
        parts->mse = static_cast<double>(mse_loss.item());
        parts->kl = static_cast<double>(kl.item());
        parts->total = static_cast<double>(total.item());
    }
    return total;
}

template <class T>
DistillResult<T> distill(const Model<T>& teacher, const IterationSchedule& teacher_schedule,
                         const ModelConfig& student_cfg, const IterationSchedule& student_schedule,
                         const DistillConfig& cfg, const std::vector<uint8_t>& train_bytes,
                         const std::vector<uint8_t>& val_bytes) {
    cfg.validate();
    teacher_schedule.validate(teacher.config());
    student_schedule.validate(student_cfg);

    Model<T> teacher_ref = teacher;
    teacher_ref.set_requires_grad(false);

    DistillResult<T> result;
    std::vector<std::string> dropped;
    result.student = warm_start(teacher, student_cfg, &dropped);
    for (const auto& name : dropped)
        std::fprintf(stderr, "distill: teacher parameter '%s' not applicable to student, dropped\n",
                     name.c_str());

    const TrainConfig& tc = cfg.train;
    result.warmstart_val_loss = evaluate(result.student, student_schedule, val_bytes, tc.seq_len,
                                         tc.batch_sequences(), tc.eval_max_batches);
    {
        MetricsRow row;
        row.step = 0;
        row.split = "val";
        row.loss = result.warmstart_val_loss;
        row.ppl = std::exp(result.warmstart_val_loss);
        result.log.add(row);
    }

    AdamW<T> opt(result.student.params(), decay_mask(result.student));
    opt.zero_grad();
    BatchStream stream(train_bytes, tc.seq_len, tc.batch_sequences(), tc.seed);

    const bool checks_were_on = finite_checks();
    if (tc.precision == Precision::f32) set_finite_checks(false);

    for (int64_t step = 0; step < tc.total_steps; ++step) {
        const Batch b = stream.next();

        ForwardTrace<T> teacher_trace;  // inference mode: no tape is active
        teacher_ref.forward(b.inputs, b.batch, b.seq_len, teacher_schedule, &teacher_trace);

        DistillLossParts<T> parts;
        {
            Graph<T> tape;
            ForwardTrace<T> student_trace;
            result.student.forward(b.inputs, b.batch, b.seq_len, student_schedule, &student_trace);
            Tensor<T> total = distill_loss(teacher_trace, student_trace, b.targets, cfg, &parts);
            if (!std::isfinite(parts.total)) {
                set_finite_checks(checks_were_on);
                throw divergence_error("non-finite distillation loss at step " +
                                       std::to_string(step));
            }
            tape.backward(total);
        }
        const double gnorm = opt.clip_grad_norm(tc.grad_clip);
        const double lr = lr_at(step, tc);
        opt.step(lr, tc.weight_decay);
        opt.zero_grad();

        MetricsRow row;
        row.step = step;
        row.split = "train";
        row.loss = parts.total;
        row.ppl = std::exp(parts.ce);
        row.lr = lr;
        row.grad_norm = gnorm;
        row.has_components = true;
        row.loss_ce = parts.ce;
        row.loss_mse = parts.mse;
        row.loss_kl = parts.kl;
        result.log.add(row);

        if (tc.eval_every > 0 && (step + 1) % tc.eval_every == 0 && step + 1 < tc.total_steps) {
            const double vl = evaluate(result.student, student_schedule, val_bytes, tc.seq_len,
                                       tc.batch_sequences(), tc.eval_max_batches);
            MetricsRow er;
            er.step = step + 1;
            er.split = "val";
            er.loss = vl;
            er.ppl = std::exp(vl);
            er.lr = lr_at(step + 1, tc);
            result.log.add(er);
        }
    }
    set_finite_checks(checks_were_on);

    result.final_val_loss = evaluate(result.student, student_schedule, val_bytes, tc.seq_len,
                                     tc.batch_sequences(), tc.eval_max_batches);
    MetricsRow er;
    er.step = tc.total_steps;
    er.split = "val";
    er.loss = result.final_val_loss;
    er.ppl = std::exp(result.final_val_loss);
    result.log.add(er);
    return result;
}

template <class T>
DistillResult<T> distil_pcformer_baseline(const Model<T>& pc_teacher, const DistillConfig& cfg,
                                          const std::vector<uint8_t>& train_bytes,
                                          const std::vector<uint8_t>& val_bytes) {
    if (pc_teacher.config().solver.kind != SolverKind::pc)
        throw config_error("distil_pcformer_baseline: teacher solver must be pc");
    ModelConfig student_cfg = pc_teacher.config();
    student_cfg.solver = SolverSpec::euler();
    const IterationSchedule teacher_sched = IterationSchedule::full(pc_teacher.config());
    const IterationSchedule student_sched = IterationSchedule::full(student_cfg);
    return distill(pc_teacher, teacher_sched, student_cfg, student_sched, cfg, train_bytes,
                   val_bytes);
}

#define IIE_INSTANTIATE(T)                                                                        \
    template Model<T> warm_start(const Model<T>&, const ModelConfig&, std::vector<std::string>*); \
    template Tensor<T> distill_loss(const ForwardTrace<T>&, const ForwardTrace<T>&,               \
                                    const std::vector<int32_t>&, const DistillConfig&,            \
                                    DistillLossParts<T>*);                                        \
    template DistillResult<T> distill(const Model<T>&, const IterationSchedule&,                  \
                                      const ModelConfig&, const IterationSchedule&,               \
                                      const DistillConfig&, const std::vector<uint8_t>&,          \
                                      const std::vector<uint8_t>&);                               \
    template DistillResult<T> distil_pcformer_baseline(const Model<T>&, const DistillConfig&,     \
                                                       const std::vector<uint8_t>&,               \
                                                       const std::vector<uint8_t>&);

IIE_INSTANTIATE(float)
IIE_INSTANTIATE(double)

#undef IIE_INSTANTIATE

}  // namespace iie
