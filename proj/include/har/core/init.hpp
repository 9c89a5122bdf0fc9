#pragma once

#include <cmath>
#include <string>

#include "har/core/random.hpp"
#include "har/core/tensor.hpp"

namespace har {

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialization from a seeded
/// stream; fan_in is the effective inputs per output unit.

template <typename T>
ParameterT<T> init_conv_weight(std::string name, int cout, int cin_per_group, int kw, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(cin_per_group * kw));
    TensorT<T> w({cout, cin_per_group, kw});
    rng.fill_uniform(w, -bound, bound);
    return ParameterT<T>(std::move(name), std::move(w));
}

template <typename T>
ParameterT<T> init_bias(std::string name, int n, double fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / fan_in);
    TensorT<T> b({n});
    rng.fill_uniform(b, -bound, bound);
    return ParameterT<T>(std::move(name), std::move(b));
}

/// Dense weight stored [M,N]. With groups > 1 only block-diagonal entries are
/// initialized; cross-group entries stay zero and never receive gradient.
template <typename T>
ParameterT<T> init_dense_weight(std::string name, int m, int n, int groups, Rng& rng) {
    const int mg = m / groups, ng = n / groups;
    const double bound = std::sqrt(1.0 / static_cast<double>(ng));
    TensorT<T> w({m, n});
    for (int r = 0; r < m; ++r) {
        const int g = r / mg;
        for (int c = g * ng; c < (g + 1) * ng; ++c)
            w.at(r, c) = static_cast<T>(rng.uniform(-bound, bound));
    }
    return ParameterT<T>(std::move(name), std::move(w));
}

/// Per-channel batch-norm state: learnable gamma/beta plus running mean/var
/// buffers used at inference.
template <typename T>
struct BatchNormT {
    ParameterT<T> gamma, beta;
    TensorT<T> run_mean, run_var;

    BatchNormT() = default;
    BatchNormT(const std::string& name, int channels)
        : gamma(name + ".gamma", TensorT<T>::full({channels}, T(1))),
          beta(name + ".beta", TensorT<T>({channels})),
          run_mean({channels}),
          run_var(TensorT<T>::full({channels}, T(1))) {}
};

}  // namespace har
