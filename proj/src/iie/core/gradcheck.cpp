#include "iie/core/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "iie/core/graph.h"

namespace iie {

double grad_check(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> params,
                  double eps) {
    for (auto& p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }

    std::vector<std::vector<double>> analytic;
    {
        Graph<double> tape;
        Tensor<double> loss = f();
        tape.backward(loss);
        for (auto& p : params)
            analytic.emplace_back(p.grad(), p.grad() + p.numel());
    }

    double worst = 0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<double>& p = params[pi];
        for (int64_t i = 0; i < p.numel(); ++i) {
            const double keep = p.data()[i];
            p.data()[i] = keep + eps;
            const double fp = f().item();  // no active graph: forward only
            p.data()[i] = keep - eps;
            const double fm = f().item();
            p.data()[i] = keep;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double rel =
                std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace iie
