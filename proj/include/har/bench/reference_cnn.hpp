#pragma once

#include <string>
#include <utility>
#include <vector>

#include "har/core/graph.hpp"
#include "har/core/init.hpp"

namespace har {

/// Minimal plain-CNN baseline for harness sanity checks: two conv/pool
/// stages, global average pooling, dense classifier. Not a tuned model.
template <typename T>
class ReferenceCnnT {
public:
    ReferenceCnnT(int channels, int window, int num_classes, uint64_t seed)
        : channels_(channels), window_(window), num_classes_(num_classes) {
        require(window >= 8, "reference cnn: window must be >= 8, got ", window);
        Rng rng(Rng::derive(seed, 0xc44));
        conv1_w_ = init_conv_weight<T>("conv1.w", 16, channels, 5, rng);
        conv1_b_ = init_bias<T>("conv1.b", 16, channels * 5, rng);
        conv2_w_ = init_conv_weight<T>("conv2.w", 32, 16, 5, rng);
        conv2_b_ = init_bias<T>("conv2.b", 32, 16 * 5, rng);
        fc_w_ = init_dense_weight<T>("fc.w", num_classes, 32, 1, rng);
        fc_b_ = init_bias<T>("fc.b", num_classes, 32, rng);
    }

    Var forward(GraphT<T>& g, Var x, bool /*training*/) {
        const TensorT<T>& xi = g.val(x);
        require(xi.ndim() == 3 && xi.dim(1) == channels_ && xi.dim(2) == window_,
                "reference cnn forward: expected [B,", channels_, ",", window_, "], got ",
                shape_str(xi.shape()));
        Var h = g.relu(g.conv1d(x, g.param(conv1_w_), g.param(conv1_b_), 1, 2, 1));
        h = g.pool1d(h, PoolKind::kMax, 2, 2);
        h = g.relu(g.conv1d(h, g.param(conv2_w_), g.param(conv2_b_), 1, 2, 1));
        h = g.pool1d(h, PoolKind::kMax, 2, 2);
        return g.dense(g.global_avg_pool(h), g.param(fc_w_), g.param(fc_b_), 1);
    }

    std::vector<ParameterT<T>*> parameters() {
        return {&conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_, &fc_w_, &fc_b_};
    }

    std::vector<std::pair<std::string, TensorT<T>*>> named_tensors() {
        std::vector<std::pair<std::string, TensorT<T>*>> out;
        for (auto* p : parameters()) out.emplace_back(p->name, &p->value);
        return out;
    }

    int num_classes() const { return num_classes_; }
    int channels() const { return channels_; }
    int window() const { return window_; }

private:
    int channels_, window_, num_classes_;
    ParameterT<T> conv1_w_, conv1_b_, conv2_w_, conv2_b_, fc_w_, fc_b_;
};

using ReferenceCnn = ReferenceCnnT<float>;

}  // namespace har
