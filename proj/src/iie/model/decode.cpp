#include "iie/model/decode.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "iie/kernels/kernels.h"
#include "iie/model/flops.h"
#include "iie/util/rng.h"

namespace iie {

template <class T>
DecodeSession<T>::DecodeSession(const Model<T>& model, const IterationSchedule& schedule)
    : model_(model), schedule_(schedule) {
    schedule_.validate(model.config());
    const auto& cfg = model.config();
    kcache_.assign(cfg.n_layers, {});
    vcache_.assign(cfg.n_layers, {});
    pending_k_.assign(cfg.n_layers, std::vector<T>(cfg.d_model));
    pending_v_.assign(cfg.n_layers, std::vector<T>(cfg.d_model));
    reset();
}

template <class T>
void DecodeSession<T>::reset() {
    const auto& cfg = model_.config();
    pos_ = 0;
    for (int l = 0; l < cfg.n_layers; ++l) {
        kcache_[l].assign(static_cast<size_t>(cfg.max_seq_len * cfg.d_model), T(0));
        vcache_[l].assign(static_cast<size_t>(cfg.max_seq_len * cfg.d_model), T(0));
    }
}

// Attention branch against the committed cache plus this evaluation's fresh
// K/V row (stored as pending until the sub-block commits).
template <class T>
Tensor<T> DecodeSession<T>::attended(const Tensor<T>& y, int layer) {
    const auto& cfg = model_.config();
    const auto& lp = model_.layers()[static_cast<size_t>(layer)];
    const int64_t d = cfg.d_model;
    const int heads = cfg.n_heads;
    const int64_t dh = d / heads;
    const T scl = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    const std::vector<int32_t> position{static_cast<int32_t>(pos_)};

    Tensor<T> n = rms_norm(y, lp.attn_norm, cfg.rms_eps).reshape({1, d});
    Tensor<T> q = rope(matmul(n, lp.wq).reshape({1, 1, d}), heads, position);
    Tensor<T> k = rope(matmul(n, lp.wk).reshape({1, 1, d}), heads, position);
    Tensor<T> v = matmul(n, lp.wv);

    std::copy(k.data(), k.data() + d, pending_k_[layer].begin());
    std::copy(v.data(), v.data() + d, pending_v_[layer].begin());

    const auto& kk = kern::K<T>();
    const int64_t ctx = pos_ + 1;
    std::vector<T> scores(ctx), out(d, T(0));
    for (int h = 0; h < heads; ++h) {
        const int64_t off = h * dh;
        const T* qh = q.data() + off;
        for (int64_t j = 0; j < ctx; ++j) {
            const T* kj = (j < pos_ ? kcache_[layer].data() + j * d : pending_k_[layer].data()) + off;
            scores[j] = scl * kk.dot(qh, kj, dh);
        }
        const T m = kk.reduce_max(scores.data(), ctx);
        for (int64_t j = 0; j < ctx; ++j) scores[j] -= m;
        kk.vexp(scores.data(), scores.data(), ctx);
        const T inv = T(1) / kk.reduce_sum(scores.data(), ctx);
        for (int64_t j = 0; j < ctx; ++j) {
            const T* vj = (j < pos_ ? vcache_[layer].data() + j * d : pending_v_[layer].data()) + off;
            kk.axpy(scores[j] * inv, vj, out.data() + off, dh);
        }
    }
    return matmul(Tensor<T>::from_vec({1, d}, std::move(out)), lp.wo).reshape({1, 1, d});
}

template <class T>
std::vector<T> DecodeSession<T>::step(int32_t token) {
    const auto& cfg = model_.config();
    if (pos_ >= cfg.max_seq_len)
        throw config_error("decode: position " + std::to_string(pos_) + " exceeds max_seq_len");
    if (token < 0 || token >= cfg.vocab_size)
        throw index_error("decode: token " + std::to_string(token) + " out of range");

    const int64_t d = cfg.d_model;
    Tensor<T> x = Tensor<T>::zeros({1, 1, d});
    std::copy(model_.embedding_table().data() + token * d,
              model_.embedding_table().data() + (token + 1) * d, x.data());

    HistoryStack<T> stack;
    int sb = 0;
    auto run = [&](const BlockFn<T>& F, const Tensor<T>& y) {
        const int idx = sb++;
        const SolverCoeffs<T>& c = model_.solver_coeffs()[static_cast<size_t>(idx)];
        switch (cfg.solver.kind) {
            case SolverKind::euler: return euler_step(F, y, &stack);
            case SolverKind::rk: return rk_step(F, y, c, cfg.solver.order, &stack);
            case SolverKind::pc: return pc_step(F, y, c, cfg.solver.order, stack);
            case SolverKind::dlcl: return iie_step(F, y, 0, c, stack);
            case SolverKind::iie: return iie_step(F, y, schedule_.r[idx], c, stack);
        }
        return y;
    };
    auto commit = [&](int layer) {
        std::copy(pending_k_[layer].begin(), pending_k_[layer].end(),
                  kcache_[layer].begin() + pos_ * d);
        std::copy(pending_v_[layer].begin(), pending_v_[layer].end(),
                  vcache_[layer].begin() + pos_ * d);
    };

    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto& lp = model_.layers()[static_cast<size_t>(l)];
        if (cfg.solver_site == SolverSite::per_sub_block) {
            x = run([&](const Tensor<T>& y) { return attended(y, l); }, x);
            commit(l);
            x = run([&](const Tensor<T>& y) { return model_.ffn_branch(y, lp); }, x);
        } else {
            x = run(
                [&](const Tensor<T>& y) {
                    Tensor<T> a = attended(y, l);
                    Tensor<T> m = model_.ffn_branch(add(y, a), lp);
                    return add(a, m);
                },
                x);
            commit(l);
        }
    }

    Tensor<T> h = rms_norm(x, model_.final_norm_gain(), cfg.rms_eps).reshape({1, d});
    Tensor<T> logits = matmul(h, model_.output_table(), false, true);
    ++pos_;
    return logits.vec();
}

template <class T>
std::vector<int32_t> greedy_decode(const Model<T>& model, const IterationSchedule& schedule,
                                   const std::vector<int32_t>& prompt, int gen_len) {
    if (prompt.empty()) throw param_error("greedy_decode: prompt must be non-empty");
    DecodeSession<T> session(model, schedule);
    std::vector<T> logits;
    for (int32_t tok : prompt) logits = session.step(tok);
    std::vector<int32_t> out;
    out.reserve(gen_len);
    for (int g = 0; g < gen_len; ++g) {
        int32_t best = 0;
        for (int64_t i = 1; i < static_cast<int64_t>(logits.size()); ++i)
            if (logits[i] > logits[best]) best = static_cast<int32_t>(i);
        out.push_back(best);
        if (session.position() >= model.config().max_seq_len) break;
        logits = session.step(best);
    }
    return out;
}

template <class T>
BenchResult benchmark_decode(const Model<T>& model, const IterationSchedule& schedule,
                             int prompt_len, int gen_len, int runs, uint64_t seed) {
    if (runs < 5) runs = 5;  // median over at least five runs
    const auto& cfg = model.config();
    if (prompt_len < 1 || prompt_len + gen_len > cfg.max_seq_len)
        throw param_error("benchmark: prompt_len + gen_len must fit in max_seq_len");

    Rng rng(seed);
    std::vector<int32_t> prompt(static_cast<size_t>(prompt_len));
    for (auto& t : prompt) t = static_cast<int32_t>(rng.uniform_int(cfg.vocab_size));

    std::vector<double> rates;
    for (int run = 0; run < runs; ++run) {
        DecodeSession<T> session(model, schedule);
        std::vector<T> logits;
        for (int32_t tok : prompt) logits = session.step(tok);
        const auto t0 = std::chrono::steady_clock::now();
        for (int g = 0; g < gen_len; ++g) {
            int32_t best = 0;
            for (int64_t i = 1; i < static_cast<int64_t>(logits.size()); ++i)
                if (logits[i] > logits[best]) best = static_cast<int32_t>(i);
            logits = session.step(best);
        }
        const auto t1 = std::chrono::steady_clock::now();
        rates.push_back(gen_len / std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(rates.begin(), rates.end());

    BenchResult r;
    r.tokens_per_sec = rates[rates.size() / 2];
    r.evals_per_token = static_cast<double>(count_block_evals(cfg, schedule));
    r.runs = runs;
    r.prompt_len = prompt_len;
    r.gen_len = gen_len;
    return r;
}

#define IIE_INSTANTIATE(T)                                                                     \
    template class DecodeSession<T>;                                                           \
    template std::vector<int32_t> greedy_decode(const Model<T>&, const IterationSchedule&,     \
                                                const std::vector<int32_t>&, int);             \
    template BenchResult benchmark_decode(const Model<T>&, const IterationSchedule&, int, int, \
                                          int, uint64_t);

IIE_INSTANTIATE(float)
IIE_INSTANTIATE(double)

#undef IIE_INSTANTIATE

}  // namespace iie
