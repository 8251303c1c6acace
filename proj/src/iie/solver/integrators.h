#pragma once

#include <functional>

#include "iie/solver/history.h"
#include "iie/solver/solver_spec.h"

namespace iie {

// The residual-update rule family, generic over the block function F (a
// causal-attention or FFN branch in the model, a scalar map in the ODE
// harness). Network form: the step size is absorbed into F. Every step
// appends exactly one entry to the history stack, so downstream sub-blocks
// see one representative output per predecessor regardless of solver kind.

template <class T>
using BlockFn = std::function<Tensor<T>(const Tensor<T>&)>;

// y + F(y). One F evaluation.
template <class T>
Tensor<T> euler_step(const BlockFn<T>& F, const Tensor<T>& y, HistoryStack<T>* history = nullptr);

// Runge-Kutta with learnable stage weights: F_1 = F(y),
// F_i = F(y + sum_{j<i} beta_ij F_j), out = y + sum_i gamma_i F_i.
// o F evaluations; the combined increment is pushed.
template <class T>
Tensor<T> rk_step(const BlockFn<T>& F, const Tensor<T>& y, const SolverCoeffs<T>& c, int order,
                  HistoryStack<T>* history = nullptr);

// Predictor-corrector: RK stages combined with EMA weights
// gamma*(1-gamma)^(o-i) give y_p; the corrector adds alpha*F(y_p) plus
// beta times the sum of (up to) the last three stack entries, F(y_p)
// included once pushed. o+1 F evaluations.
template <class T>
Tensor<T> pc_step(const BlockFn<T>& F, const Tensor<T>& y, const SolverCoeffs<T>& c, int order,
                  HistoryStack<T>& history);

// Iterative implicit Euler. f0 = F(y) is pushed, the merge rule
//   merge(y, L) = y + merge_coef[top]*L.top + sum_j merge_coef[j]*L[j]
// produces the explicit-Euler-style initial estimate, and each of the r
// refinements re-evaluates F at the latest estimate, replaces the top entry
// and re-merges. The final output is the merge of the final stack state,
// which is what makes r = 0 coincide with the DLCL update. r+1 F
// evaluations. When `iterates` is given it receives the r+1 successive
// estimates (initial one first).
template <class T>
Tensor<T> iie_step(const BlockFn<T>& F, const Tensor<T>& y, int r, const SolverCoeffs<T>& c,
                   HistoryStack<T>& history, std::vector<Tensor<T>>* iterates = nullptr);

// DLCL multistep update == iie_step with r = 0.
template <class T>
Tensor<T> dlcl_step(const BlockFn<T>& F, const Tensor<T>& y, const SolverCoeffs<T>& c,
                    HistoryStack<T>& history);

}  // namespace iie
