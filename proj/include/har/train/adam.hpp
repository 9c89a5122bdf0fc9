#pragma once

#include <cmath>
#include <vector>

#include "har/core/error.hpp"
#include "har/core/tensor.hpp"

namespace har {

/// Adam with decoupled-style weight decay folded into the update:
///   m <- b1 m + (1-b1) g          v <- b2 v + (1-b2) g^2
///   m^ = m/(1-b1^t)               v^ = v/(1-b2^t)
///   theta <- theta - eta (m^ + lambda theta) / (sqrt(v^) + eps)
template <typename T>
struct AdamT {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;

    int64_t t = 0;
    std::vector<TensorT<T>> m, v;

    void attach(const std::vector<ParameterT<T>*>& params) {
        m.clear();
        v.clear();
        for (const auto* p : params) {
            m.emplace_back(p->value.shape());
            v.emplace_back(p->value.shape());
        }
        t = 0;
    }

    void step(const std::vector<ParameterT<T>*>& params) {
        require(m.size() == params.size(), "adam: attached to ", m.size(),
                " parameters, stepping ", params.size());
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            ParameterT<T>& p = *params[i];
            require(p.grad.same_shape(p.value), "adam: parameter ", p.name,
                    " gradient shape mismatch");
            for (int64_t j = 0; j < p.value.size(); ++j) {
                const double g = static_cast<double>(p.grad[j]);
                require(std::isfinite(g), "adam: non-finite gradient in parameter ", p.name,
                        " at element ", j);
                const double m_new = beta1 * static_cast<double>(m[i][j]) + (1.0 - beta1) * g;
                const double v_new = beta2 * static_cast<double>(v[i][j]) + (1.0 - beta2) * g * g;
                m[i][j] = static_cast<T>(m_new);
                v[i][j] = static_cast<T>(v_new);
                const double m_hat = m_new / bc1;
                const double v_hat = v_new / bc2;
                const double theta = static_cast<double>(p.value[j]);
                p.value[j] = static_cast<T>(
                    theta - lr * (m_hat + weight_decay * theta) / (std::sqrt(v_hat) + eps));
            }
        }
    }

    void zero_grads(const std::vector<ParameterT<T>*>& params) {
        for (auto* p : params) p->zero_grad();
    }
};

using Adam = AdamT<float>;

}  // namespace har
