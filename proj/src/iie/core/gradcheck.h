#pragma once

#include <functional>
#include <span>

#include "iie/core/tensor.h"

namespace iie {

// Central-difference gradient checker (test oracle). f must be a
// deterministic scalar function of the given parameters. Returns the max over
// all parameter coordinates of |analytic - numeric| / max(1, |numeric|).
double grad_check(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> params,
                  double eps = 1e-5);

}  // namespace iie
