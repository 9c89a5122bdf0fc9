#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "har/core/graph.hpp"
#include "har/core/init.hpp"
#include "har/synth/features.hpp"
#include "har/train/adam.hpp"

namespace har {

/// Noise schedule for x~ = x sqrt(beta[t]) + eps sqrt(1 - beta[t]). beta
/// multiplies the signal, so a strictly decreasing schedule makes noise grow
/// with t; values stay in (0, 1].
struct DiffusionSchedule {
    int steps = 50;
    std::vector<double> beta;  // beta[0] unused; valid t in [1, steps]

    static DiffusionSchedule linear(int steps = 50, double beta_start = 0.999,
                                    double beta_end = 0.02) {
        require(steps >= 1, "diffusion schedule: steps must be >= 1");
        DiffusionSchedule s;
        s.steps = steps;
        s.beta.resize(static_cast<size_t>(steps) + 1, 0.0);
        for (int t = 1; t <= steps; ++t)
            s.beta[static_cast<size_t>(t)] =
                steps == 1 ? beta_start
                           : beta_start + (beta_end - beta_start) * (t - 1) / (steps - 1);
        s.validate();
        return s;
    }

    void validate() const {
        require(static_cast<int>(beta.size()) == steps + 1, "diffusion schedule: beta size");
        for (int t = 1; t <= steps; ++t) {
            const double b = beta[static_cast<size_t>(t)];
            require(b > 0.0 && b <= 1.0, "diffusion schedule: beta[", t, "] = ", b,
                    " outside (0,1]");
            if (t > 1)
                require(b != beta[static_cast<size_t>(t) - 1],
                        "diffusion schedule: beta must be strictly monotone at t=", t);
        }
        for (int t = 2; t <= steps; ++t)
            require((beta[2] > beta[1]) == (beta[static_cast<size_t>(t)] >
                                            beta[static_cast<size_t>(t) - 1]),
                    "diffusion schedule: beta must be strictly monotone");
    }
};

/// x~ = x sqrt(beta[t]) + eps sqrt(1 - beta[t]) with eps drawn i.i.d.
/// standard normal in the same shape as x. Returns (x~, eps).
inline std::pair<TensorF, TensorF> noising(const TensorF& x, int t,
                                           const DiffusionSchedule& schedule, Rng& rng) {
    require(t >= 1 && t <= schedule.steps, "noising: step t=", t, " outside [1,",
            schedule.steps, "]");
    const double b = schedule.beta[static_cast<size_t>(t)];
    const double sig = std::sqrt(b);
    const double noi = std::sqrt(1.0 - b);
    TensorF eps(x.shape());
    rng.fill_normal(eps);
    TensorF out(x.shape());
    for (int64_t i = 0; i < x.size(); ++i)
        out[i] = static_cast<float>(x[i] * sig + eps[i] * noi);
    return {std::move(out), std::move(eps)};
}

struct DenoiserConfig {
    int channels = 3;
    int window = 90;
    int hidden = 16;
    int embed_dim = 16;  // sinusoidal diffusion-step embedding width
};

/// Encoder-decoder denoiser. The encoder runs three 9-tap convolutions (noise
/// branch, statistics branch, and the merge after concatenation) followed by
/// a max-pool of window 2, stride 2; the statistics input is first projected
/// to the noise-data shape, and the embedded diffusion step is added onto the
/// noise branch. The decoder upsamples x2 and applies one more 9-tap
/// convolution; a final 1-tap projection restores the input channel count, so
/// output shape always equals input shape.
template <typename T>
class DenoiserT {
public:
    explicit DenoiserT(DenoiserConfig cfg, uint64_t seed) : cfg_(cfg) {
        require(cfg.channels >= 1 && cfg.window >= 4, "denoiser config: channels/window");
        require(cfg.embed_dim % 2 == 0, "denoiser config: embed_dim must be even");
        Rng rng(Rng::derive(seed, 0xd1ff));
        const int C = cfg.channels, H = cfg.hidden, E = cfg.embed_dim;
        conv_noise_w_ = init_conv_weight<T>("enc.noise.w", H, C, 9, rng);
        conv_noise_b_ = init_bias<T>("enc.noise.b", H, C * 9, rng);
        step_fc_w_ = init_dense_weight<T>("enc.step.w", H, E, 1, rng);
        step_fc_b_ = init_bias<T>("enc.step.b", H, E, rng);
        stat_proj_w_ = init_conv_weight<T>("enc.stat_proj.w", C, 4 * C, 1, rng);
        stat_proj_b_ = init_bias<T>("enc.stat_proj.b", C, 4 * C, rng);
        conv_stat_w_ = init_conv_weight<T>("enc.stat.w", H, C, 9, rng);
        conv_stat_b_ = init_bias<T>("enc.stat.b", H, C * 9, rng);
        conv_merge_w_ = init_conv_weight<T>("enc.merge.w", H, 2 * H, 9, rng);
        conv_merge_b_ = init_bias<T>("enc.merge.b", H, 2 * H * 9, rng);
        conv_dec_w_ = init_conv_weight<T>("dec.conv.w", H, H, 9, rng);
        conv_dec_b_ = init_bias<T>("dec.conv.b", H, H * 9, rng);
        out_proj_w_ = init_conv_weight<T>("dec.out.w", C, H, 1, rng);
        out_proj_b_ = init_bias<T>("dec.out.b", C, H, rng);
    }

    /// Sinusoidal embedding of the diffusion step, one row per batch entry.
    TensorT<T> embed_steps(const std::vector<int>& ts) const {
        const int E = cfg_.embed_dim;
        TensorT<T> e({static_cast<int>(ts.size()), E});
        for (size_t b = 0; b < ts.size(); ++b)
            for (int j = 0; j < E / 2; ++j) {
                const double freq = std::pow(10000.0, -2.0 * j / E);
                e.at(static_cast<int>(b), 2 * j) = static_cast<T>(std::sin(ts[b] * freq));
                e.at(static_cast<int>(b), 2 * j + 1) = static_cast<T>(std::cos(ts[b] * freq));
            }
        return e;
    }

    /// noisy [B,C,W], stats [B,4C,W] -> reconstruction [B,C,W].
    Var forward(GraphT<T>& g, Var noisy, Var stats, const std::vector<int>& ts) {
        const TensorT<T>& xi = g.val(noisy);
        require(xi.ndim() == 3 && xi.dim(1) == cfg_.channels && xi.dim(2) == cfg_.window,
                "denoiser forward: expected [B,", cfg_.channels, ",", cfg_.window, "], got ",
                shape_str(xi.shape()));
        const TensorT<T>& fi = g.val(stats);
        require(fi.ndim() == 3 && fi.dim(1) == 4 * cfg_.channels && fi.dim(2) == cfg_.window,
                "denoiser forward: stats must be [B,", 4 * cfg_.channels, ",", cfg_.window,
                "], got ", shape_str(fi.shape()));
        require(static_cast<int>(ts.size()) == xi.dim(0), "denoiser forward: ", ts.size(),
                " steps for batch of ", xi.dim(0));

        Var hn = g.relu(g.conv1d(noisy, g.param(conv_noise_w_), g.param(conv_noise_b_), 1, 4, 1));
        Var emb = g.dense(g.value(embed_steps(ts)), g.param(step_fc_w_), g.param(step_fc_b_), 1);
        hn = g.add_gate_channel(hn, emb);

        Var fs = g.conv1d(stats, g.param(stat_proj_w_), g.param(stat_proj_b_), 1, 0, 1);
        Var hs = g.relu(g.conv1d(fs, g.param(conv_stat_w_), g.param(conv_stat_b_), 1, 4, 1));

        Var merged = g.relu(g.conv1d(g.concat_axis1({hn, hs}), g.param(conv_merge_w_),
                                     g.param(conv_merge_b_), 1, 4, 1));
        Var pooled = g.pool1d(merged, PoolKind::kMax, 2, 2);
        Var up = g.pad_or_crop_time(g.upsample_nearest(pooled, 2), cfg_.window);
        Var dec = g.relu(g.conv1d(up, g.param(conv_dec_w_), g.param(conv_dec_b_), 1, 4, 1));
        return g.conv1d(dec, g.param(out_proj_w_), g.param(out_proj_b_), 1, 0, 1);
    }

    std::vector<ParameterT<T>*> parameters() {
        return {&conv_noise_w_, &conv_noise_b_, &step_fc_w_, &step_fc_b_,
                &stat_proj_w_,  &stat_proj_b_,  &conv_stat_w_, &conv_stat_b_,
                &conv_merge_w_, &conv_merge_b_, &conv_dec_w_,  &conv_dec_b_,
                &out_proj_w_,   &out_proj_b_};
    }

    std::vector<std::pair<std::string, TensorT<T>*>> named_tensors() {
        std::vector<std::pair<std::string, TensorT<T>*>> out;
        for (auto* p : parameters()) out.emplace_back(p->name, &p->value);
        return out;
    }

    const DenoiserConfig& config() const { return cfg_; }

private:
    DenoiserConfig cfg_;
    ParameterT<T> conv_noise_w_, conv_noise_b_;
    ParameterT<T> step_fc_w_, step_fc_b_;
    ParameterT<T> stat_proj_w_, stat_proj_b_;
    ParameterT<T> conv_stat_w_, conv_stat_b_;
    ParameterT<T> conv_merge_w_, conv_merge_b_;
    ParameterT<T> conv_dec_w_, conv_dec_b_;
    ParameterT<T> out_proj_w_, out_proj_b_;
};

using Denoiser = DenoiserT<float>;

/// Mean absolute reconstruction error over all elements; with equally sized
/// windows this equals the per-sample L1 means averaged over the batch.
template <typename T>
Var reconstruction_loss(GraphT<T>& g, Var recon, Var target) {
    return g.mean_all(g.abs(g.sub(recon, target)));
}

struct PretrainOptions {
    int steps = 300;
    int batch_size = 16;
    double lr = 2e-3;
    uint64_t seed = 1;
};

/// Reconstruction pretraining: sample windows and diffusion steps, corrupt by
/// the noising rule, and minimize mean absolute reconstruction error against
/// the originals. Returns the per-step loss trace. Aborts if the loss leaves
/// the finite range.
template <typename T>
std::vector<double> pretrain(DenoiserT<T>& model, const std::vector<SensorWindow>& windows,
                             const std::vector<int>& train_idx,
                             const DiffusionSchedule& schedule, const PretrainOptions& opts) {
    require(!windows.empty() && !train_idx.empty(), "pretrain: dataset is empty");
    const int C = model.config().channels, W = model.config().window;
    AdamT<T> adam;
    adam.lr = opts.lr;
    auto params = model.parameters();
    adam.attach(params);
    Rng rng(Rng::derive(opts.seed, 0x9e7a));

    std::vector<double> trace;
    trace.reserve(static_cast<size_t>(opts.steps));
    for (int step = 0; step < opts.steps; ++step) {
        const int B = opts.batch_size;
        TensorT<T> noisy({B, C, W}), clean({B, C, W}), stats({B, 4 * C, W});
        std::vector<int> ts(static_cast<size_t>(B));
        for (int b = 0; b < B; ++b) {
            const int idx = train_idx[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int>(train_idx.size()) - 1))];
            const SensorWindow& w = windows[static_cast<size_t>(idx)];
            require(w.channels() == C && w.width() == W, "pretrain: window shape ",
                    shape_str(w.values.shape()), " does not match model [", C, ",", W, "]");
            const int t = rng.uniform_int(1, schedule.steps);
            ts[static_cast<size_t>(b)] = t;
            auto [xt, eps] = noising(w.values, t, schedule, rng);
            StatFeatures f = extract_features(w.values);
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < W; ++i) {
                    noisy.at(b, c, i) = static_cast<T>(xt.at(c, i));
                    clean.at(b, c, i) = static_cast<T>(w.values.at(c, i));
                }
            for (int c = 0; c < 4 * C; ++c)
                for (int i = 0; i < W; ++i) stats.at(b, c, i) = static_cast<T>(f.fused.at(c, i));
        }

        GraphT<T> g;
        Var recon = model.forward(g, g.value(std::move(noisy)), g.value(std::move(stats)), ts);
        Var loss = reconstruction_loss(g, recon, g.value(std::move(clean)));
        const double lv = static_cast<double>(g.val(loss)[0]);
        require(std::isfinite(lv), "pretrain diverged: non-finite reconstruction loss ", lv,
                " at step ", step);
        trace.push_back(lv);

        adam.zero_grads(params);
        g.backward(loss);
        adam.step(params);
    }
    return trace;
}

struct GenerateOptions {
    int refine_steps = 1;  // repeated denoise passes; 1 = single-shot
    uint64_t seed = 1;
};

/// Draws standard-normal windows and denoises them conditioned on the given
/// class statistics. Deterministic for a fixed seed; emitted windows carry
/// the conditioning label and synthetic=true.
template <typename T>
std::vector<SensorWindow> generate(DenoiserT<T>& model, const StatFeatures& features, int count,
                                   int label, const GenerateOptions& opts = {}) {
    require(count >= 0, "generate: count must be >= 0");
    require(opts.refine_steps >= 1, "generate: refine_steps must be >= 1");
    const int C = model.config().channels, W = model.config().window;
    require(features.channels() == C && features.width() == W,
            "generate: conditioning features are [", features.channels(), ",",
            features.width(), "], model expects [", C, ",", W, "]");
    std::vector<SensorWindow> out;
    if (count == 0) return out;

    Rng rng(Rng::derive(opts.seed, 0x6e4));
    const DiffusionSchedule sched = DiffusionSchedule::linear();
    TensorT<T> stats({1, 4 * C, W});
    for (int c = 0; c < 4 * C; ++c)
        for (int i = 0; i < W; ++i) stats.at(0, c, i) = static_cast<T>(features.fused.at(c, i));

    for (int n = 0; n < count; ++n) {
        TensorT<T> current({1, C, W});
        rng.fill_normal(current);
        for (int j = 0; j < opts.refine_steps; ++j) {
            const int t = std::max(
                1, sched.steps - j * sched.steps / std::max(1, opts.refine_steps));
            GraphT<T> g;
            Var recon = model.forward(g, g.value(current), g.value(stats), {t});
            current = g.val(recon);
        }
        SensorWindow w;
        w.values = TensorF({C, W});
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < W; ++i) w.values.at(c, i) = static_cast<float>(current.at(0, c, i));
        w.label = label;
        w.subject = -1;
        w.synthetic = true;
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace har
