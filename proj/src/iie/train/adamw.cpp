#include "iie/train/adamw.h"

#include <cmath>

namespace iie {

template <class T>
AdamW<T>::AdamW(std::vector<Tensor<T>> params, std::vector<bool> decay_mask, double beta1,
                double beta2, double eps)
    : params_(std::move(params)), decay_(std::move(decay_mask)), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
    if (decay_.size() != params_.size())
        throw param_error("adamw: decay mask size does not match parameter count");
    for (auto& p : params_) {
        p.set_requires_grad(true);
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

template <class T>
double AdamW<T>::clip_grad_norm(double max_norm) {
    double sq = 0;
    for (auto& p : params_) {
        const T* g = p.grad();
        for (int64_t i = 0; i < p.numel(); ++i)
            sq += static_cast<double>(g[i]) * static_cast<double>(g[i]);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0) {
        const T s = static_cast<T>(max_norm / norm);
        for (auto& p : params_) {
            T* g = p.grad();
            for (int64_t i = 0; i < p.numel(); ++i) g[i] *= s;
        }
    }
    return norm;
}

template <class T>
void AdamW<T>::step(double lr, double weight_decay) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor<T>& p = params_[pi];
        const T* g = p.grad();
        T* w = p.data();
        double* m = m_[pi].data();
        double* v = v_[pi].data();
        const double wd = decay_[pi] ? weight_decay : 0.0;
        for (int64_t i = 0; i < p.numel(); ++i) {
            const double gi = static_cast<double>(g[i]);
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            const double upd = mhat / (std::sqrt(vhat) + eps_) + wd * static_cast<double>(w[i]);
            w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * upd);
        }
    }
}

template <class T>
void AdamW<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace iie
