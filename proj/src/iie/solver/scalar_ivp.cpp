#include "iie/solver/scalar_ivp.h"

#include <cmath>

#include "iie/core/ops.h"
#include "iie/solver/integrators.h"

namespace iie {

std::vector<double> solve_scalar_ivp(const ScalarIvp& ivp, IvpMethod method, int r) {
    ivp.validate();
    const double hl = ivp.h * ivp.lambda;
    if (method == IvpMethod::iie && std::abs(hl) >= 1.0)
        throw divergence_error(
            "iie fixed-point iteration requires the contraction bound |h*lambda| < 1, got |" +
            std::to_string(ivp.h) + " * " + std::to_string(ivp.lambda) +
            "| = " + std::to_string(std::abs(hl)));
    if (r < 0) throw config_error("scalar ivp: iteration count must be >= 0");

    std::vector<double> traj;
    traj.reserve(ivp.steps + 1);
    traj.push_back(ivp.y0);

    if (method == IvpMethod::implicit_exact) {
        const double factor = 1.0 / (1.0 - hl);
        for (int s = 0; s < ivp.steps; ++s) traj.push_back(traj.back() * factor);
        return traj;
    }

    // network form: h*lambda folded into F
    BlockFn<double> F = [hl](const Tensor<double>& y) { return scale(y, hl); };
    SolverCoeffs<double> coeffs = init_solver_coeffs<double>(SolverSpec::iie(r), 0);

    for (int s = 0; s < ivp.steps; ++s) {
        Tensor<double> y = Tensor<double>::scalar(traj.back());
        if (method == IvpMethod::explicit_euler) {
            traj.push_back(euler_step(F, y).item());
        } else {
            HistoryStack<double> stack;  // fresh per step: no cross-step history
            traj.push_back(iie_step(F, y, r, coeffs, stack).item());
        }
    }
    return traj;
}

}  // namespace iie
