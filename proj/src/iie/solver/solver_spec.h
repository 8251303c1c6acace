#pragma once

#include <string>
#include <vector>

#include "iie/core/tensor.h"

namespace iie {

enum class SolverKind { euler, dlcl, rk, pc, iie };

const char* solver_kind_name(SolverKind k);
SolverKind solver_kind_from(const std::string& s);

// Residual-update rule selection plus its structural hyperparameters. The
// learnable coefficients themselves live in SolverCoeffs, one set per
// sub-block, owned by the model.
struct SolverSpec {
    SolverKind kind = SolverKind::euler;
    int order = 0;       // rk/pc stage count, 1..4
    int iterations = 0;  // iie max refinement count r, >= 0

    static SolverSpec euler() { return {SolverKind::euler, 0, 0}; }
    static SolverSpec dlcl() { return {SolverKind::dlcl, 0, 0}; }
    static SolverSpec rk(int order) { return {SolverKind::rk, order, 0}; }
    static SolverSpec pc(int order) { return {SolverKind::pc, order, 0}; }
    static SolverSpec iie(int iterations) { return {SolverKind::iie, 0, iterations}; }

    bool uses_history() const { return kind == SolverKind::dlcl || kind == SolverKind::iie; }
    bool iterative() const { return kind == SolverKind::iie; }

    // Rejects populated fields that are irrelevant to `kind` (and bad ranges).
    void validate() const;
};

// Learnable coefficients for one sub-block. Only the members relevant to the
// spec's kind are defined tensors.
template <class T>
struct SolverCoeffs {
    // dlcl/iie: history merge, one weight per prior sub-block entry plus the
    // current block's top entry (last element).
    Tensor<T> merge;

    // rk (and the pc predictor): stage combination and stage-offset weights.
    // rk_beta[i-2] holds the strictly-lower-triangular row for stage i.
    Tensor<T> rk_gamma;
    std::vector<Tensor<T>> rk_beta;

    // pc: EMA predictor weight and corrector coefficients.
    Tensor<T> ema_gamma;
    Tensor<T> corr_alpha;
    Tensor<T> corr_beta;
};

// Default initialization: every variant starts at (or next to) a vanilla
// residual network. merge = [0,...,0,1], gamma_i = 1/o, beta_ij = 1/(i-1),
// EMA gamma = 0.5, corrector alpha = 1, beta = 0.
template <class T>
SolverCoeffs<T> init_solver_coeffs(const SolverSpec& spec, int64_t prior_entries);

}  // namespace iie
