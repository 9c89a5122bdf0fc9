#pragma once

#include <cmath>
#include <vector>

#include "har/core/error.hpp"
#include "har/core/tensor.hpp"
#include "har/data/dataset.hpp"

namespace har {

/// Conditioning statistics of one window (population statistics, per
/// channel): mean, standard deviation, z-score series z = (x - mu)/sigma and
/// skewness E[((x - mu)/sigma)^3]. `fused` stacks the four series — scalars
/// broadcast over time — as [4C, W], so every feature row has the length of
/// the input sequence. Rows are feature-major: C means, C stds, C z-score
/// rows, C skewnesses.
struct StatFeatures {
    std::vector<double> mean;
    std::vector<double> stddev;    // floored at kSigmaFloor
    std::vector<double> skewness;
    TensorF zscore;  // [C, W]
    TensorF fused;   // [4C, W]

    int channels() const { return zscore.ndim() == 2 ? zscore.dim(0) : 0; }
    int width() const { return zscore.ndim() == 2 ? zscore.dim(1) : 0; }
};

inline StatFeatures extract_features(const TensorF& values) {
    require(values.ndim() == 2, "extract_features: input must be [C,W], got ",
            shape_str(values.shape()));
    const int C = values.dim(0), W = values.dim(1);
    require(W >= 2, "extract_features: window must have at least 2 samples, got ", W);

    StatFeatures f;
    f.mean.resize(static_cast<size_t>(C));
    f.stddev.resize(static_cast<size_t>(C));
    f.skewness.resize(static_cast<size_t>(C));
    f.zscore = TensorF({C, W});
    f.fused = TensorF({4 * C, W});

    for (int c = 0; c < C; ++c) {
        double mu = 0.0;
        for (int t = 0; t < W; ++t) mu += values.at(c, t);
        mu /= W;
        double var = 0.0;
        for (int t = 0; t < W; ++t) {
            const double d = values.at(c, t) - mu;
            var += d * d;
        }
        var /= W;
        const double sigma = std::max(std::sqrt(var), static_cast<double>(kSigmaFloor));
        double skew = 0.0;
        for (int t = 0; t < W; ++t) {
            const double z = (values.at(c, t) - mu) / sigma;
            f.zscore.at(c, t) = static_cast<float>(z);
            skew += z * z * z;
        }
        skew /= W;
        f.mean[static_cast<size_t>(c)] = mu;
        f.stddev[static_cast<size_t>(c)] = sigma;
        f.skewness[static_cast<size_t>(c)] = var == 0.0 ? 0.0 : skew;

        for (int t = 0; t < W; ++t) {
            f.fused.at(c, t) = static_cast<float>(mu);
            f.fused.at(C + c, t) = static_cast<float>(sigma);
            f.fused.at(2 * C + c, t) = f.zscore.at(c, t);
            f.fused.at(3 * C + c, t) = static_cast<float>(f.skewness[static_cast<size_t>(c)]);
        }
    }
    return f;
}

/// Element-wise average of the per-window statistics over every window of one
/// class; used to condition generation on that class.
inline StatFeatures class_features(const std::vector<SensorWindow>& windows,
                                   const std::vector<int>& indices, int label) {
    StatFeatures acc;
    int64_t n = 0;
    for (int idx : indices) {
        const SensorWindow& w = windows[static_cast<size_t>(idx)];
        if (w.label != label) continue;
        StatFeatures f = extract_features(w.values);
        if (n == 0) {
            acc = std::move(f);
        } else {
            for (size_t c = 0; c < acc.mean.size(); ++c) {
                acc.mean[c] += f.mean[c];
                acc.stddev[c] += f.stddev[c];
                acc.skewness[c] += f.skewness[c];
            }
            for (int64_t i = 0; i < acc.zscore.size(); ++i) acc.zscore[i] += f.zscore[i];
            for (int64_t i = 0; i < acc.fused.size(); ++i) acc.fused[i] += f.fused[i];
        }
        ++n;
    }
    require(n > 0, "class_features: no windows with label ", label);
    const float inv = 1.0f / static_cast<float>(n);
    for (size_t c = 0; c < acc.mean.size(); ++c) {
        acc.mean[c] *= inv;
        acc.stddev[c] *= inv;
        acc.skewness[c] *= inv;
    }
    for (int64_t i = 0; i < acc.zscore.size(); ++i) acc.zscore[i] *= inv;
    for (int64_t i = 0; i < acc.fused.size(); ++i) acc.fused[i] *= inv;
    return acc;
}

}  // namespace har
