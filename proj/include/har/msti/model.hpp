#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "har/core/graph.hpp"
#include "har/core/init.hpp"
#include "har/msti/config.hpp"

namespace har {

/// Optional recorder for intermediate activations a forward pass produces;
/// used by invariant tests (weight normalization, gate ranges, equivariance).
template <typename T>
struct ForwardProbeT {
    std::vector<TensorT<T>> radix_weights;    // per (block, cardinal group): [B,R,C/K]
    std::vector<TensorT<T>> spatial_maps;     // per radix split: [B,1,S]
    std::vector<TensorT<T>> attended_splits;  // per (block, k, i), post spatial gate: [B,C/K,S]
    std::vector<TensorT<T>> fused_concat;     // per block, pre-unify concat: [B,C,S]
};

using ForwardProbe = ForwardProbeT<float>;

/// One split-attention block: grouped 3-tap convolution into K*R splits,
/// spatial attention per split, per-cardinal-group radix fusion driven by
/// channel statistics, channel concatenation, 1x1 unification, and a residual
/// shortcut (projected when shapes differ).
template <typename T>
struct SplitAttentionBlockT {
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
    int cardinality = 1;
    int radix = 1;
    int hidden = 8;
    AttentionVariant variant = AttentionVariant::kFull;
    double bn_momentum = 0.1, bn_eps = 1e-5;

    ParameterT<T> conv_w, conv_b;  // [R*C, Cin/(K*R), 3], grouped
    BatchNormT<T> bn_conv;
    ParameterT<T> sa_w, sa_b;  // spatial attention: [1,2,3] conv, shared across splits
    ParameterT<T> fc1_w, fc1_b, fc2_w, fc2_b;  // grouped attention MLP
    ParameterT<T> unify_w, unify_b;  // [C,C,1]
    BatchNormT<T> bn_unify;
    bool has_projection = false;
    ParameterT<T> proj_w, proj_b;  // shortcut [C,Cin,1], stride-matched
    BatchNormT<T> bn_proj;

    bool use_spatial() const {
        return variant == AttentionVariant::kSpatial || variant == AttentionVariant::kFull;
    }
    bool use_channel_attention() const {
        return variant == AttentionVariant::kTemporal || variant == AttentionVariant::kFull;
    }

    SplitAttentionBlockT(const std::string& name, int in_ch, int out_ch, int stride_,
                         const MstiConfig& cfg, Rng& rng)
        : in_channels(in_ch),
          out_channels(out_ch),
          stride(stride_),
          cardinality(cfg.cardinality),
          radix(cfg.radix),
          variant(cfg.variant),
          bn_momentum(cfg.bn_momentum),
          bn_eps(cfg.bn_eps) {
        const int groups = cardinality * radix;
        require(in_ch % groups == 0, "block ", name, ": input channels ", in_ch,
                " not divisible by K*R = ", groups);
        require(out_ch % groups == 0, "block ", name, ": output channels ", out_ch,
                " not divisible by K*R = ", groups);
        const int ck = out_ch / cardinality;  // channels per cardinal group (= per split)
        hidden = std::max(cfg.fc_min_hidden, ck / cfg.fc_reduction);

        const int conv_out = radix * out_ch;
        conv_w = init_conv_weight<T>(name + ".conv.w", conv_out, in_ch / groups, 3, rng);
        conv_b = init_bias<T>(name + ".conv.b", conv_out, (in_ch / groups) * 3, rng);
        bn_conv = BatchNormT<T>(name + ".bn_conv", conv_out);

        if (use_spatial()) {
            sa_w = init_conv_weight<T>(name + ".sa.w", 1, 2, 3, rng);
            sa_b = init_bias<T>(name + ".sa.b", 1, 6, rng);
        }
        if (use_channel_attention()) {
            const int fc1_out = cardinality * hidden;
            fc1_w = init_dense_weight<T>(name + ".fc1.w", fc1_out, out_ch, cardinality, rng);
            fc1_b = init_bias<T>(name + ".fc1.b", fc1_out, ck, rng);
            const int fc2_out = radix * out_ch;
            fc2_w = init_dense_weight<T>(name + ".fc2.w", fc2_out, fc1_out, cardinality, rng);
            fc2_b = init_bias<T>(name + ".fc2.b", fc2_out, hidden, rng);
        }

        unify_w = init_conv_weight<T>(name + ".unify.w", out_ch, out_ch, 1, rng);
        unify_b = init_bias<T>(name + ".unify.b", out_ch, out_ch, rng);
        bn_unify = BatchNormT<T>(name + ".bn_unify", out_ch);

        has_projection = in_ch != out_ch || stride != 1;
        if (has_projection) {
            proj_w = init_conv_weight<T>(name + ".proj.w", out_ch, in_ch, 1, rng);
            proj_b = init_bias<T>(name + ".proj.b", out_ch, in_ch, rng);
            bn_proj = BatchNormT<T>(name + ".bn_proj", out_ch);
        }
    }

    Var forward(GraphT<T>& g, Var x, bool training, ForwardProbeT<T>* probe = nullptr) {
        const int K = cardinality, R = radix;
        const int ck = out_channels / K;

        Var u = g.conv1d(x, g.param(conv_w), g.param(conv_b), stride, 1, K * R);
        u = g.batch_norm1d(u, g.param(bn_conv.gamma), g.param(bn_conv.beta), bn_conv.run_mean,
                           bn_conv.run_var, training, static_cast<T>(bn_momentum),
                           static_cast<T>(bn_eps));
        u = g.relu(u);

        // splits laid out radix-major: split (k, i) at channel (i*K + k)*ck
        std::vector<std::vector<Var>> splits(static_cast<size_t>(K));
        std::vector<Var> uhat(static_cast<size_t>(K));   // cardinal sums
        std::vector<Var> fused(static_cast<size_t>(K));  // V^k
        for (int k = 0; k < K; ++k) {
            splits[static_cast<size_t>(k)].resize(static_cast<size_t>(R));
            for (int i = 0; i < R; ++i) {
                Var s = g.slice_axis1(u, (i * K + k) * ck, ck);
                if (use_spatial()) {
                    Var stats = g.channel_avg_max(s);
                    Var gate = g.sigmoid(g.conv1d(stats, g.param(sa_w), g.param(sa_b), 1, 1, 1));
                    if (probe) probe->spatial_maps.push_back(g.val(gate));
                    s = g.mul_gate_time(s, gate);
                }
                if (probe) probe->attended_splits.push_back(g.val(s));
                splits[static_cast<size_t>(k)][static_cast<size_t>(i)] = s;
            }
            Var sum = splits[static_cast<size_t>(k)][0];
            for (int i = 1; i < R; ++i)
                sum = g.add(sum, splits[static_cast<size_t>(k)][static_cast<size_t>(i)]);
            uhat[static_cast<size_t>(k)] = sum;
            fused[static_cast<size_t>(k)] = sum;  // base/spatial variants fuse by plain sum
        }

        if (use_channel_attention()) {
            std::vector<Var> stats(static_cast<size_t>(K));
            for (int k = 0; k < K; ++k)
                stats[static_cast<size_t>(k)] = g.global_avg_pool(uhat[static_cast<size_t>(k)]);
            Var s_all = g.concat_axis1(stats);  // [B, C]
            Var h = g.relu(g.dense(s_all, g.param(fc1_w), g.param(fc1_b), K));
            Var logits = g.dense(h, g.param(fc2_w), g.param(fc2_b), K);  // [B, R*C]
            const int B = g.val(logits).dim(0);
            for (int k = 0; k < K; ++k) {
                // group k emits R*ck logits, radix-major within the group
                Var lk = g.slice_axis1(logits, k * R * ck, R * ck);
                Var l3 = g.reshape(lk, {B, R, ck});
                Var a = R > 1 ? g.softmax(l3, 1) : g.sigmoid(l3);
                if (probe) probe->radix_weights.push_back(g.val(a));
                Var vk;
                for (int i = 0; i < R; ++i) {
                    Var ai = g.reshape(g.slice_axis1(a, i, 1), {B, ck});
                    Var term = g.mul_gate_channel(
                        splits[static_cast<size_t>(k)][static_cast<size_t>(i)], ai);
                    vk = i == 0 ? term : g.add(vk, term);
                }
                fused[static_cast<size_t>(k)] = vk;
            }
        }

        Var v = g.concat_axis1(fused);
        if (probe) probe->fused_concat.push_back(g.val(v));
        Var y = g.conv1d(v, g.param(unify_w), g.param(unify_b), 1, 0, 1);
        y = g.batch_norm1d(y, g.param(bn_unify.gamma), g.param(bn_unify.beta),
                           bn_unify.run_mean, bn_unify.run_var, training,
                           static_cast<T>(bn_momentum), static_cast<T>(bn_eps));

        Var shortcut = x;
        if (has_projection) {
            shortcut = g.conv1d(x, g.param(proj_w), g.param(proj_b), stride, 0, 1);
            shortcut = g.batch_norm1d(shortcut, g.param(bn_proj.gamma), g.param(bn_proj.beta),
                                      bn_proj.run_mean, bn_proj.run_var, training,
                                      static_cast<T>(bn_momentum), static_cast<T>(bn_eps));
        }
        return g.relu(g.add(y, shortcut));
    }

    void collect(std::vector<ParameterT<T>*>& params, std::vector<BatchNormT<T>*>& bns) {
        params.push_back(&conv_w);
        params.push_back(&conv_b);
        bns.push_back(&bn_conv);
        if (use_spatial()) {
            params.push_back(&sa_w);
            params.push_back(&sa_b);
        }
        if (use_channel_attention()) {
            params.push_back(&fc1_w);
            params.push_back(&fc1_b);
            params.push_back(&fc2_w);
            params.push_back(&fc2_b);
        }
        params.push_back(&unify_w);
        params.push_back(&unify_b);
        bns.push_back(&bn_unify);
        if (has_projection) {
            params.push_back(&proj_w);
            params.push_back(&proj_b);
            bns.push_back(&bn_proj);
        }
    }
};

/// MSTI network: stem convolution, stages of split-attention blocks (each
/// stage downsamples x2 via its first block's stride-2 grouped convolution),
/// global average pooling, and a dense classifier emitting raw logits.
template <typename T>
class MstiModelT {
public:
    explicit MstiModelT(MstiConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng rng(Rng::derive(seed, 0x3571));

        stem_w_ = init_conv_weight<T>("stem.conv.w", cfg_.stem_channels, cfg_.channels,
                                      cfg_.stem_taps, rng);
        stem_b_ = init_bias<T>("stem.conv.b", cfg_.stem_channels,
                               cfg_.channels * cfg_.stem_taps, rng);
        stem_bn_ = BatchNormT<T>("stem.bn", cfg_.stem_channels);

        int in_ch = cfg_.stem_channels;
        for (size_t s = 0; s < cfg_.stages.size(); ++s) {
            for (int b = 0; b < cfg_.stages[s].blocks; ++b) {
                const std::string name = str("stage", s, ".block", b);
                const int stride = b == 0 ? 2 : 1;
                blocks_.push_back(std::make_unique<SplitAttentionBlockT<T>>(
                    name, in_ch, cfg_.stages[s].width, stride, cfg_, rng));
                in_ch = cfg_.stages[s].width;
            }
        }
        head_w_ = init_dense_weight<T>("head.fc.w", cfg_.num_classes, in_ch, 1, rng);
        head_b_ = init_bias<T>("head.fc.b", cfg_.num_classes, in_ch, rng);
    }

    /// x: [B, channels, window] -> logits [B, num_classes].
    Var forward(GraphT<T>& g, Var x, bool training, ForwardProbeT<T>* probe = nullptr) {
        const TensorT<T>& xi = g.val(x);
        require(xi.ndim() == 3 && xi.dim(1) == cfg_.channels && xi.dim(2) == cfg_.window,
                "msti forward: expected input [B,", cfg_.channels, ",", cfg_.window,
                "], got ", shape_str(xi.shape()));
        Var h = g.conv1d(x, g.param(stem_w_), g.param(stem_b_), 1, (cfg_.stem_taps - 1) / 2, 1);
        h = g.batch_norm1d(h, g.param(stem_bn_.gamma), g.param(stem_bn_.beta),
                           stem_bn_.run_mean, stem_bn_.run_var, training,
                           static_cast<T>(cfg_.bn_momentum), static_cast<T>(cfg_.bn_eps));
        h = g.relu(h);
        for (auto& block : blocks_) h = block->forward(g, h, training, probe);
        Var pooled = g.global_avg_pool(h);
        return g.dense(pooled, g.param(head_w_), g.param(head_b_), 1);
    }

    std::vector<ParameterT<T>*> parameters() {
        std::vector<ParameterT<T>*> params;
        std::vector<BatchNormT<T>*> bns;
        gather(params, bns);
        for (auto* bn : bns) {
            params.push_back(&bn->gamma);
            params.push_back(&bn->beta);
        }
        return params;
    }

    /// Parameters plus batch-norm running buffers, in checkpoint order.
    std::vector<std::pair<std::string, TensorT<T>*>> named_tensors() {
        std::vector<std::pair<std::string, TensorT<T>*>> out;
        for (auto* p : parameters()) out.emplace_back(p->name, &p->value);
        std::vector<ParameterT<T>*> params;
        std::vector<BatchNormT<T>*> bns;
        gather(params, bns);
        for (auto* bn : bns) {
            const std::string base = bn->gamma.name.substr(0, bn->gamma.name.rfind(".gamma"));
            out.emplace_back(base + ".run_mean", &bn->run_mean);
            out.emplace_back(base + ".run_var", &bn->run_var);
        }
        return out;
    }

    int64_t param_count() {
        int64_t n = 0;
        for (auto* p : parameters()) n += p->value.size();
        return n;
    }

    const MstiConfig& config() const { return cfg_; }
    int num_classes() const { return cfg_.num_classes; }
    SplitAttentionBlockT<T>& block(size_t i) { return *blocks_[i]; }
    size_t num_blocks() const { return blocks_.size(); }

private:
    void gather(std::vector<ParameterT<T>*>& params, std::vector<BatchNormT<T>*>& bns) {
        params.push_back(&stem_w_);
        params.push_back(&stem_b_);
        bns.push_back(&stem_bn_);
        for (auto& b : blocks_) b->collect(params, bns);
        params.push_back(&head_w_);
        params.push_back(&head_b_);
    }

    MstiConfig cfg_;
    ParameterT<T> stem_w_, stem_b_;
    BatchNormT<T> stem_bn_;
    std::vector<std::unique_ptr<SplitAttentionBlockT<T>>> blocks_;
    ParameterT<T> head_w_, head_b_;
};

using MstiModel = MstiModelT<float>;

}  // namespace har
