#pragma once

#include <vector>

#include "iie/core/tensor.h"

namespace iie {

// AdamW with decoupled weight decay. Decay is applied only where the mask
// says so (norm gains and solver coefficients are structural, not feature
// weights, and stay unshrunk).
template <class T>
class AdamW {
public:
    AdamW(std::vector<Tensor<T>> params, std::vector<bool> decay_mask, double beta1 = 0.9,
          double beta2 = 0.999, double eps = 1e-8);

    // Global-norm clip: if ||g|| > max_norm, scales all grads by
    // max_norm/||g||. Returns the pre-clip norm.
    double clip_grad_norm(double max_norm);

    void step(double lr, double weight_decay);

    void zero_grad();

    int64_t steps_taken() const { return t_; }

private:
    std::vector<Tensor<T>> params_;
    std::vector<bool> decay_;
    std::vector<std::vector<double>> m_, v_;  // f64 moments for both precisions
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace iie
