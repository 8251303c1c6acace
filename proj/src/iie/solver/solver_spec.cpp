#include "iie/solver/solver_spec.h"

namespace iie {

const char* solver_kind_name(SolverKind k) {
    switch (k) {
        case SolverKind::euler: return "euler";
        case SolverKind::dlcl: return "dlcl";
        case SolverKind::rk: return "rk";
        case SolverKind::pc: return "pc";
        case SolverKind::iie: return "iie";
    }
    return "?";
}

SolverKind solver_kind_from(const std::string& s) {
    if (s == "euler") return SolverKind::euler;
    if (s == "dlcl") return SolverKind::dlcl;
    if (s == "rk") return SolverKind::rk;
    if (s == "pc") return SolverKind::pc;
    if (s == "iie") return SolverKind::iie;
    throw config_error("unknown solver kind '" + s + "' (euler|dlcl|rk|pc|iie)");
}

void SolverSpec::validate() const {
    const bool has_order = kind == SolverKind::rk || kind == SolverKind::pc;
    if (has_order) {
        if (order < 1 || order > 4)
            throw config_error(std::string("solver ") + solver_kind_name(kind) +
                               ": order must be in [1,4], got " + std::to_string(order));
    } else if (order != 0) {
        throw config_error(std::string("solver ") + solver_kind_name(kind) +
                           " takes no order field");
    }
    if (kind == SolverKind::iie) {
        if (iterations < 0)
            throw config_error("solver iie: iterations must be >= 0, got " +
                               std::to_string(iterations));
    } else if (iterations != 0) {
        throw config_error(std::string("solver ") + solver_kind_name(kind) +
                           " takes no iterations field");
    }
}

template <class T>
SolverCoeffs<T> init_solver_coeffs(const SolverSpec& spec, int64_t prior_entries) {
    SolverCoeffs<T> c;
    switch (spec.kind) {
        case SolverKind::euler:
            break;
        case SolverKind::dlcl:
        case SolverKind::iie: {
            c.merge = Tensor<T>::zeros({prior_entries + 1});
            c.merge.data()[prior_entries] = T(1);
            break;
        }
        case SolverKind::rk:
        case SolverKind::pc: {
            const int o = spec.order;
            if (spec.kind == SolverKind::rk)
                c.rk_gamma = Tensor<T>::full({o}, T(1) / static_cast<T>(o));
            for (int i = 2; i <= o; ++i)
                c.rk_beta.push_back(Tensor<T>::full({i - 1}, T(1) / static_cast<T>(i - 1)));
            if (spec.kind == SolverKind::pc) {
                c.ema_gamma = Tensor<T>::scalar(T(0.5));
                c.corr_alpha = Tensor<T>::scalar(T(1));
                c.corr_beta = Tensor<T>::scalar(T(0));
            }
            break;
        }
    }
    return c;
}

template SolverCoeffs<float> init_solver_coeffs(const SolverSpec&, int64_t);
template SolverCoeffs<double> init_solver_coeffs(const SolverSpec&, int64_t);

}  // namespace iie
