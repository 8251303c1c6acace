#include "iie/model/model.h"

#include <algorithm>

#include "iie/util/rng.h"

namespace iie {

namespace {

template <class T>
Tensor<T> normal_init(Rng& rng, const Shape& shape, double stddev) {
    Tensor<T> t = Tensor<T>::zeros(shape);
    T* v = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) v[i] = static_cast<T>(rng.normal(0.0, stddev));
    return t;
}

}  // namespace

template <class T>
Model<T> Model<T>::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    Rng rng(seed);
    const double std = 0.02;  // initializer_range
    const int64_t d = cfg.d_model, ff = cfg.d_ff, v = cfg.vocab_size;

    m.embed_ = normal_init<T>(rng, {v, d}, std);
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerParams lp;
        lp.attn_norm = Tensor<T>::full({d}, T(1));
        lp.wq = normal_init<T>(rng, {d, d}, std);
        lp.wk = normal_init<T>(rng, {d, d}, std);
        lp.wv = normal_init<T>(rng, {d, d}, std);
        lp.wo = normal_init<T>(rng, {d, d}, std);
        lp.ffn_norm = Tensor<T>::full({d}, T(1));
        lp.w_gate = normal_init<T>(rng, {d, ff}, std);
        lp.w_up = normal_init<T>(rng, {d, ff}, std);
        lp.w_down = normal_init<T>(rng, {ff, d}, std);
        m.layers_.push_back(std::move(lp));
    }
    m.final_norm_ = Tensor<T>::full({d}, T(1));
    if (!cfg.tie_embeddings) m.lm_head_ = normal_init<T>(rng, {v, d}, std);
    for (int sb = 0; sb < cfg.sub_block_count(); ++sb)
        m.solver_.push_back(init_solver_coeffs<T>(cfg.solver, sb));
    m.register_params();
    return m;
}

template <class T>
Model<T> Model<T>::zeros(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    const int64_t d = cfg.d_model, ff = cfg.d_ff, v = cfg.vocab_size;
    m.embed_ = Tensor<T>::zeros({v, d});
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerParams lp;
        lp.attn_norm = Tensor<T>::zeros({d});
        lp.wq = Tensor<T>::zeros({d, d});
        lp.wk = Tensor<T>::zeros({d, d});
        lp.wv = Tensor<T>::zeros({d, d});
        lp.wo = Tensor<T>::zeros({d, d});
        lp.ffn_norm = Tensor<T>::zeros({d});
        lp.w_gate = Tensor<T>::zeros({d, ff});
        lp.w_up = Tensor<T>::zeros({d, ff});
        lp.w_down = Tensor<T>::zeros({ff, d});
        m.layers_.push_back(std::move(lp));
    }
    m.final_norm_ = Tensor<T>::zeros({d});
    if (!cfg.tie_embeddings) m.lm_head_ = Tensor<T>::zeros({v, d});
    for (int sb = 0; sb < cfg.sub_block_count(); ++sb) {
        SolverCoeffs<T> c = init_solver_coeffs<T>(cfg.solver, sb);
        if (c.merge.defined()) std::fill(c.merge.vec().begin(), c.merge.vec().end(), T(0));
        if (c.rk_gamma.defined()) std::fill(c.rk_gamma.vec().begin(), c.rk_gamma.vec().end(), T(0));
        for (auto& b : c.rk_beta) std::fill(b.vec().begin(), b.vec().end(), T(0));
        if (c.ema_gamma.defined()) c.ema_gamma.data()[0] = T(0);
        if (c.corr_alpha.defined()) c.corr_alpha.data()[0] = T(0);
        if (c.corr_beta.defined()) c.corr_beta.data()[0] = T(0);
        m.solver_.push_back(std::move(c));
    }
    m.register_params();
    return m;
}

template <class T>
void Model<T>::register_params() {
    named_.clear();
    named_.emplace_back("embed.weight", embed_);
    for (size_t l = 0; l < layers_.size(); ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        named_.emplace_back(p + "attn_norm.gain", layers_[l].attn_norm);
        named_.emplace_back(p + "attn.wq", layers_[l].wq);
        named_.emplace_back(p + "attn.wk", layers_[l].wk);
        named_.emplace_back(p + "attn.wv", layers_[l].wv);
        named_.emplace_back(p + "attn.wo", layers_[l].wo);
        named_.emplace_back(p + "ffn_norm.gain", layers_[l].ffn_norm);
        named_.emplace_back(p + "ffn.w_gate", layers_[l].w_gate);
        named_.emplace_back(p + "ffn.w_up", layers_[l].w_up);
        named_.emplace_back(p + "ffn.w_down", layers_[l].w_down);
    }
    named_.emplace_back("final_norm.gain", final_norm_);
    if (!cfg_.tie_embeddings) named_.emplace_back("lm_head.weight", lm_head_);
    for (size_t sb = 0; sb < solver_.size(); ++sb) {
        const std::string p = "solver." + std::to_string(sb) + ".";
        SolverCoeffs<T>& c = solver_[sb];
        if (c.merge.defined()) named_.emplace_back(p + "merge", c.merge);
        if (c.rk_gamma.defined()) named_.emplace_back(p + "rk_gamma", c.rk_gamma);
        for (size_t i = 0; i < c.rk_beta.size(); ++i)
            named_.emplace_back(p + "rk_beta." + std::to_string(i + 2), c.rk_beta[i]);
        if (c.ema_gamma.defined()) named_.emplace_back(p + "ema_gamma", c.ema_gamma);
        if (c.corr_alpha.defined()) named_.emplace_back(p + "corr_alpha", c.corr_alpha);
        if (c.corr_beta.defined()) named_.emplace_back(p + "corr_beta", c.corr_beta);
    }
}

template <class T>
std::vector<Tensor<T>> Model<T>::params() const {
    std::vector<Tensor<T>> out;
    out.reserve(named_.size());
    for (const auto& [name, t] : named_) out.push_back(t);
    return out;
}

template <class T>
Tensor<T> Model<T>::param(const std::string& name) const {
    for (const auto& [n, t] : named_)
        if (n == name) return t;
    throw index_error("no parameter named '" + name + "'");
}

template <class T>
bool Model<T>::has_param(const std::string& name) const {
    for (const auto& [n, t] : named_)
        if (n == name) return true;
    return false;
}

template <class T>
int64_t Model<T>::param_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : named_) n += t.numel();
    return n;
}

template <class T>
void Model<T>::set_requires_grad(bool rg) {
    for (auto& [name, t] : named_) t.set_requires_grad(rg);
}

template <class T>
void Model<T>::zero_grads() {
    for (auto& [name, t] : named_) t.zero_grad();
}

template <class T>
Model<T> Model<T>::clone() const {
    Model m = Model::zeros(cfg_);
    for (size_t i = 0; i < named_.size(); ++i) m.named_[i].second.vec() = named_[i].second.vec();
    return m;
}

template <class T>
Tensor<T> Model<T>::attn_branch(const Tensor<T>& y, const LayerParams& lp,
                                const std::vector<int32_t>& positions) const {
    const int64_t b = y.dim(0), t = y.dim(1), d = y.dim(2);
    Tensor<T> n = rms_norm(y, lp.attn_norm, cfg_.rms_eps).reshape({b * t, d});
    Tensor<T> q = rope(matmul(n, lp.wq).reshape({b, t, d}), cfg_.n_heads, positions);
    Tensor<T> k = rope(matmul(n, lp.wk).reshape({b, t, d}), cfg_.n_heads, positions);
    Tensor<T> v = matmul(n, lp.wv).reshape({b, t, d});
    Tensor<T> a = causal_attention(q, k, v, cfg_.n_heads);
    return matmul(a.reshape({b * t, d}), lp.wo).reshape({b, t, d});
}

template <class T>
Tensor<T> Model<T>::ffn_branch(const Tensor<T>& y, const LayerParams& lp) const {
    const int64_t b = y.dim(0), t = y.dim(1), d = y.dim(2);
    Tensor<T> n = rms_norm(y, lp.ffn_norm, cfg_.rms_eps).reshape({b * t, d});
    Tensor<T> g = silu(matmul(n, lp.w_gate));
    Tensor<T> u = matmul(n, lp.w_up);
    return matmul(mul(g, u), lp.w_down).reshape({b, t, d});
}

template <class T>
Tensor<T> Model<T>::forward(const std::vector<int32_t>& tokens, int64_t batch, int64_t seq_len,
                            const IterationSchedule& schedule, ForwardTrace<T>* trace) const {
    schedule.validate(cfg_);
    if (seq_len > cfg_.max_seq_len)
        throw config_error("sequence length " + std::to_string(seq_len) +
                           " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
    if (static_cast<int64_t>(tokens.size()) != batch * seq_len)
        throw shape_error("forward: got " + std::to_string(tokens.size()) + " tokens for batch " +
                          std::to_string(batch) + " x " + std::to_string(seq_len));

    std::vector<int32_t> positions(seq_len);
    for (int64_t i = 0; i < seq_len; ++i) positions[i] = static_cast<int32_t>(i);

    const int64_t d = cfg_.d_model;
    Tensor<T> x = embedding(embed_, tokens).reshape({batch, seq_len, d});
    if (trace) trace->embed_out = x;

    HistoryStack<T> stack;
    int sb = 0;
    auto run = [&](const BlockFn<T>& F, const Tensor<T>& y) {
        const int idx = sb++;
        if (trace) {
            trace->subblock_inputs.push_back(y);
            trace->iterates.emplace_back();
        }
        std::vector<Tensor<T>>* iters = trace ? &trace->iterates.back() : nullptr;
        const SolverCoeffs<T>& c = solver_[idx];
        Tensor<T> out;
        switch (cfg_.solver.kind) {
            case SolverKind::euler: out = euler_step(F, y, &stack); break;
            case SolverKind::rk: out = rk_step(F, y, c, cfg_.solver.order, &stack); break;
            case SolverKind::pc: out = pc_step(F, y, c, cfg_.solver.order, stack); break;
            case SolverKind::dlcl: out = iie_step(F, y, 0, c, stack, iters); break;
            case SolverKind::iie: out = iie_step(F, y, schedule.r[idx], c, stack, iters); break;
        }
        if (iters && iters->empty()) iters->push_back(out);
        return out;
    };

    for (const LayerParams& lp : layers_) {
        if (cfg_.solver_site == SolverSite::per_sub_block) {
            x = run([&](const Tensor<T>& y) { return attn_branch(y, lp, positions); }, x);
            x = run([&](const Tensor<T>& y) { return ffn_branch(y, lp); }, x);
        } else {
            x = run(
                [&](const Tensor<T>& y) {
                    Tensor<T> a = attn_branch(y, lp, positions);
                    Tensor<T> m = ffn_branch(add(y, a), lp);
                    return add(a, m);
                },
                x);
        }
        if (trace) trace->layer_outputs.push_back(x);
    }

    Tensor<T> h = rms_norm(x, final_norm_, cfg_.rms_eps).reshape({batch * seq_len, d});
    Tensor<T> logits = matmul(h, output_table(), false, true);
    if (trace) trace->logits = logits;
    return logits;
}

template class Model<float>;
template class Model<double>;

}  // namespace iie
