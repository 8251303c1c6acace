#pragma once

#include <vector>

#include "iie/util/errors.h"

namespace iie {

// Linear test equation y' = lambda*y, the closed-form harness every update
// rule is validated against. Exact per-step factors: explicit Euler
// multiplies by (1 + h*lambda), exact implicit Euler by 1/(1 - h*lambda);
// IIE approaches the implicit factor geometrically with ratio |h*lambda|.
struct ScalarIvp {
    double lambda = -2.0;
    double y0 = 1.0;
    double h = 0.25;
    int steps = 1;

    void validate() const {
        if (h <= 0) throw param_error("scalar ivp: step size h must be positive");
        if (steps < 1) throw param_error("scalar ivp: step count must be >= 1");
    }
};

enum class IvpMethod { explicit_euler, implicit_exact, iie };

// Returns the trajectory [y0, y1, ..., y_steps]. `r` is the fixed-point
// iteration count (iie only). For iie, |h*lambda| >= 1 raises a divergence
// error naming the contraction bound. The iie path runs through the same
// generic iie_step the model uses, on 1-element tensors.
std::vector<double> solve_scalar_ivp(const ScalarIvp& ivp, IvpMethod method, int r = 0);

}  // namespace iie
