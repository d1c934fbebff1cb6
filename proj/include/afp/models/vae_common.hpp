#pragma once

#include <cmath>

#include "afp/core/errors.hpp"
#include "afp/nn/tensor.hpp"

namespace afp::models {

template <typename T>
struct LatentDistribution {
    nn::VecX<T> mu;
    nn::VecX<T> logvar;
};

// KL(N(mu, exp(logvar)) || N(0, I)), summed over latent dimensions.
template <typename T>
T kl_divergence(const nn::VecX<T>& mu, const nn::VecX<T>& logvar) {
    if (mu.size() != logvar.size())
        throw InputError("kl_divergence: mu/logvar length mismatch");
    T acc = T(0);
    for (std::ptrdiff_t i = 0; i < mu.size(); ++i)
        acc += mu[i] * mu[i] + std::exp(logvar[i]) - T(1) - logvar[i];
    return T(0.5) * acc;
}

// Accumulates d(weight*KL)/dmu and d(weight*KL)/dlogvar.
template <typename T>
void kl_backward(const nn::VecX<T>& mu, const nn::VecX<T>& logvar, T weight,
                 nn::VecX<T>& dmu, nn::VecX<T>& dlogvar) {
    for (std::ptrdiff_t i = 0; i < mu.size(); ++i) {
        dmu[i] += weight * mu[i];
        dlogvar[i] += weight * T(0.5) * (std::exp(logvar[i]) - T(1));
    }
}

// z = mu + exp(logvar/2) .* eps
template <typename T>
nn::VecX<T> reparameterize(const nn::VecX<T>& mu, const nn::VecX<T>& logvar,
                           const nn::VecX<T>& eps) {
    if (eps.size() != mu.size())
        throw InputError("reparameterize: noise length mismatch");
    nn::VecX<T> z(mu.size());
    for (std::ptrdiff_t i = 0; i < mu.size(); ++i)
        z[i] = mu[i] + std::exp(T(0.5) * logvar[i]) * eps[i];
    return z;
}

// Accumulates gradients of z = mu + exp(logvar/2).*eps given dL/dz.
template <typename T>
void reparameterize_backward(const nn::VecX<T>& logvar, const nn::VecX<T>& eps,
                             const nn::VecX<T>& dz, nn::VecX<T>& dmu, nn::VecX<T>& dlogvar) {
    for (std::ptrdiff_t i = 0; i < dz.size(); ++i) {
        dmu[i] += dz[i];
        dlogvar[i] += dz[i] * T(0.5) * std::exp(T(0.5) * logvar[i]) * eps[i];
    }
}

}  // namespace afp::models
