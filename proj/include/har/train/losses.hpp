#pragma once

#include <algorithm>
#include <vector>

#include "har/core/graph.hpp"

namespace har {

/// Focal-loss and label-smoothing hyperparameters.
struct FocalParams {
    double alpha_t = 0.25;  // weight factor in [0,1]
    double gamma = 2.0;     // modulating factor, >= 0
    double eps_smooth = 0.1;
};

/// Composite-loss weights (label-smoothing, focal, cross-entropy order) with
/// the adaptive-update state.
struct LossWeights {
    double w0 = 1.0 / 3.0;  // label-smoothed NLL
    double w1 = 1.0 / 3.0;  // focal
    double w2 = 1.0 / 3.0;  // cross-entropy
    double tau = 0.5;       // weight factor in [0,1]
    double last_acc = 0.0;

    static LossWeights fixed(double a, double b, double c, double tau = 0.5) {
        LossWeights w;
        w.w0 = a;
        w.w1 = b;
        w.w2 = c;
        w.tau = tau;
        return w;
    }
    static LossWeights ce_only() { return fixed(0.0, 0.0, 1.0); }
};

/// Per-cycle feedback update: w1 = clamp(2 - tau - 1/(acc + 1e-8), 0, 1),
/// w0 = w2 = (1 - w1)/2. The raw w1 can go negative for low accuracy; the
/// clamp keeps all weights in [0,1] and their sum at 1.
inline LossWeights adapt_weights(const LossWeights& w, double acc) {
    require(acc >= 0.0 && acc <= 1.0, "adapt_weights: accuracy ", acc, " outside [0,1]");
    LossWeights out = w;
    const double raw = 2.0 - w.tau - 1.0 / (acc + 1e-8);
    out.w1 = std::clamp(raw, 0.0, 1.0);
    out.w0 = 0.5 * (1.0 - out.w1);
    out.w2 = out.w0;
    out.last_acc = acc;
    return out;
}

/// Batch-mean cross-entropy -log q(y) from a probability matrix [B,K].
template <typename T>
Var loss_ce(GraphT<T>& g, Var probs, const std::vector<int>& targets) {
    Var pt = g.select_index(probs, targets);
    return g.scale(g.mean_all(g.log_clamped(pt)), T(-1));
}

/// Batch-mean focal loss -alpha_t (1 - p_t)^gamma log p_t.
template <typename T>
Var loss_focal(GraphT<T>& g, Var probs, const std::vector<int>& targets, double alpha_t,
               double gamma) {
    Var pt = g.select_index(probs, targets);
    Var one_minus = g.affine(pt, T(-1), T(1));
    Var mod = g.pow_const(one_minus, static_cast<T>(gamma));
    Var per_sample = g.mul(mod, g.log_clamped(pt));
    return g.scale(g.mean_all(per_sample), static_cast<T>(-alpha_t));
}

/// Batch-mean label-smoothed NLL:
/// -sum_k log p(k) ((1-eps) delta_{k,y} + eps/K).
template <typename T>
Var loss_smoothed_nll(GraphT<T>& g, Var probs, const std::vector<int>& targets, double eps_smooth,
                      int num_classes) {
    const int B = g.val(probs).dim(0);
    require(g.val(probs).dim(1) == num_classes, "loss_smoothed_nll: probs have ",
            g.val(probs).dim(1), " classes, expected ", num_classes);
    TensorT<T> weights({B, num_classes});
    for (int b = 0; b < B; ++b) {
        require(targets[static_cast<size_t>(b)] >= 0 && targets[static_cast<size_t>(b)] < num_classes,
                "loss_smoothed_nll: target id ", targets[static_cast<size_t>(b)], " out of range");
        for (int k = 0; k < num_classes; ++k) {
            const double delta = k == targets[static_cast<size_t>(b)] ? 1.0 : 0.0;
            weights.at(b, k) = static_cast<T>((1.0 - eps_smooth) * delta +
                                              eps_smooth / static_cast<double>(num_classes));
        }
    }
    Var weighted = g.mul(g.log_clamped(probs), g.value(std::move(weights)));
    return g.scale(g.mean_all(g.sum_axis1(weighted)), T(-1));
}

/// Weighted sum of the three component losses; the gradient flows through all
/// terms.
template <typename T>
Var total_loss(GraphT<T>& g, Var l_sl, Var l_fl, Var l_ce, const LossWeights& w) {
    Var a = g.scale(l_sl, static_cast<T>(w.w0));
    Var b = g.scale(l_fl, static_cast<T>(w.w1));
    Var c = g.scale(l_ce, static_cast<T>(w.w2));
    return g.add(g.add(a, b), c);
}

}  // namespace har
