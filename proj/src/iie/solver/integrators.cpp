#include "iie/solver/integrators.h"

#include <span>

#include "iie/core/ops.h"

namespace iie {

namespace {

template <class T>
void check_block_shape(const Tensor<T>& y, const Tensor<T>& f) {
    if (f.shape() != y.shape())
        throw internal_error("block function changed shape " + shape_str(y.shape()) + " -> " +
                             shape_str(f.shape()));
}

// y + merge_coefs . entries (top entry's weight is the last coefficient).
template <class T>
Tensor<T> merge_history(const Tensor<T>& y, const HistoryStack<T>& h, const Tensor<T>& coefs) {
    if (coefs.numel() != h.size())
        throw shape_error("history merge: " + std::to_string(h.size()) + " entries but " +
                          std::to_string(coefs.numel()) + " coefficients");
    return weighted_sum(y, std::span<const Tensor<T>>(h.entries()), coefs);
}

}  // namespace

template <class T>
Tensor<T> euler_step(const BlockFn<T>& F, const Tensor<T>& y, HistoryStack<T>* history) {
    Tensor<T> f = F(y);
    check_block_shape(y, f);
    if (history) history->push(f);
    return add(y, f);
}

template <class T>
Tensor<T> rk_step(const BlockFn<T>& F, const Tensor<T>& y, const SolverCoeffs<T>& c, int order,
                  HistoryStack<T>* history) {
    std::vector<Tensor<T>> stages;
    stages.reserve(order);
    for (int i = 1; i <= order; ++i) {
        Tensor<T> yi = y;
        if (i > 1)
            yi = weighted_sum(y, std::span<const Tensor<T>>(stages.data(), i - 1),
                              c.rk_beta[i - 2]);
        Tensor<T> f = F(yi);
        check_block_shape(y, f);
        stages.push_back(std::move(f));
    }
    std::span<const Tensor<T>> sp(stages);
    if (history) {
        // representative entry: the gamma-combined increment
        Tensor<T> inc = weighted_sum(Tensor<T>::zeros(y.shape()), sp, c.rk_gamma);
        history->push(std::move(inc));
    }
    return weighted_sum(y, sp, c.rk_gamma);
}

template <class T>
Tensor<T> pc_step(const BlockFn<T>& F, const Tensor<T>& y, const SolverCoeffs<T>& c, int order,
                  HistoryStack<T>& history) {
    std::vector<Tensor<T>> stages;
    stages.reserve(order);
    for (int i = 1; i <= order; ++i) {
        Tensor<T> yi = y;
        if (i > 1)
            yi = weighted_sum(y, std::span<const Tensor<T>>(stages.data(), i - 1),
                              c.rk_beta[i - 2]);
        Tensor<T> f = F(yi);
        check_block_shape(y, f);
        stages.push_back(std::move(f));
    }
    Tensor<T> w = ema_weights(c.ema_gamma, order);
    Tensor<T> yp = weighted_sum(y, std::span<const Tensor<T>>(stages), w);

    Tensor<T> fp = F(yp);
    check_block_shape(y, fp);
    history.push(fp);

    Tensor<T> out = weighted_sum(y, std::span<const Tensor<T>>(&fp, 1), c.corr_alpha);
    // multistep window: up to the last three stack entries, shared beta
    const int64_t win = std::min<int64_t>(3, history.size());
    std::vector<Tensor<T>> window;
    for (int64_t j = history.size() - win; j < history.size(); ++j)
        window.push_back(history.entry(j));
    Tensor<T> wsum = add_list(std::span<const Tensor<T>>(window));
    return weighted_sum(out, std::span<const Tensor<T>>(&wsum, 1), c.corr_beta);
}

template <class T>
Tensor<T> iie_step(const BlockFn<T>& F, const Tensor<T>& y, int r, const SolverCoeffs<T>& c,
                   HistoryStack<T>& history, std::vector<Tensor<T>>* iterates) {
    if (r < 0) throw config_error("iie_step: iteration count must be >= 0, got " + std::to_string(r));
    Tensor<T> f = F(y);
    check_block_shape(y, f);
    history.push(std::move(f));

    Tensor<T> estimate = merge_history(y, history, c.merge);
    if (iterates) iterates->push_back(estimate);
    for (int i = 1; i <= r; ++i) {
        Tensor<T> fi = F(estimate);
        check_block_shape(y, fi);
        history.replace_top(std::move(fi));
        estimate = merge_history(y, history, c.merge);
        if (iterates) iterates->push_back(estimate);
    }
    return estimate;
}

template <class T>
Tensor<T> dlcl_step(const BlockFn<T>& F, const Tensor<T>& y, const SolverCoeffs<T>& c,
                    HistoryStack<T>& history) {
    return iie_step<T>(F, y, 0, c, history, nullptr);
}

#define IIE_INSTANTIATE(T)                                                                        \
    template Tensor<T> euler_step(const BlockFn<T>&, const Tensor<T>&, HistoryStack<T>*);         \
    template Tensor<T> rk_step(const BlockFn<T>&, const Tensor<T>&, const SolverCoeffs<T>&, int,  \
                               HistoryStack<T>*);                                                 \
    template Tensor<T> pc_step(const BlockFn<T>&, const Tensor<T>&, const SolverCoeffs<T>&, int,  \
                               HistoryStack<T>&);                                                 \
    template Tensor<T> iie_step(const BlockFn<T>&, const Tensor<T>&, int, const SolverCoeffs<T>&, \
                                HistoryStack<T>&, std::vector<Tensor<T>>*);                       \
    template Tensor<T> dlcl_step(const BlockFn<T>&, const Tensor<T>&, const SolverCoeffs<T>&,     \
                                 HistoryStack<T>&);

IIE_INSTANTIATE(float)
IIE_INSTANTIATE(double)

#undef IIE_INSTANTIATE

}  // namespace iie
