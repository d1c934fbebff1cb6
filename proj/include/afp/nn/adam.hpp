#pragma once

#include <cmath>

#include "afp/nn/tensor.hpp"

namespace afp::nn {

// Adaptive-moment gradient descent.
template <typename T>
class Adam {
public:
    struct Options {
        T lr = T(1e-3);
        T beta1 = T(0.9);
        T beta2 = T(0.999);
        T eps = T(1e-8);
    };

    explicit Adam(std::ptrdiff_t n, Options opts = {})
        : opts_(opts), m_(VecX<T>::Zero(n)), v_(VecX<T>::Zero(n)) {}

    void step(VecX<T>& params, const VecX<T>& grad) {
        ++t_;
        m_ = opts_.beta1 * m_ + (T(1) - opts_.beta1) * grad;
        v_ = opts_.beta2 * v_.array().matrix() +
             (T(1) - opts_.beta2) * grad.array().square().matrix();
        const T bc1 = T(1) - std::pow(opts_.beta1, T(t_));
        const T bc2 = T(1) - std::pow(opts_.beta2, T(t_));
        const T alpha = opts_.lr * std::sqrt(bc2) / bc1;
        params.array() -= alpha * m_.array() / (v_.array().sqrt() + opts_.eps);
    }

    const Options& options() const { return opts_; }

private:
    Options opts_;
    VecX<T> m_, v_;
    long t_ = 0;
};

}  // namespace afp::nn
