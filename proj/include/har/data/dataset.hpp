#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "har/core/error.hpp"
#include "har/core/random.hpp"
#include "har/core/tensor.hpp"

namespace har {

/// Fixed-length multichannel segment in raw sensor units.
struct SensorWindow {
    TensorF values;  // [C channels, W samples]
    int label = 0;
    int subject = 0;
    int64_t t_start = 0;   // sample index into the source stream
    bool synthetic = false;

    int channels() const { return values.dim(0); }
    int width() const { return values.dim(1); }
};

/// Continuous multichannel recording with a per-sample label.
struct Stream {
    int subject = 0;
    TensorF values;           // [C, T]
    std::vector<int> labels;  // length T

    int channels() const { return values.dim(0); }
    int length() const { return values.ndim() == 2 ? values.dim(1) : 0; }
};

/// Per-channel z-normalization statistics, computed on the train split only.
struct Normalization {
    std::vector<float> mean;
    std::vector<float> stddev;  // floored at sigma_floor

    float apply(float v, int c) const { return (v - mean[static_cast<size_t>(c)]) / stddev[static_cast<size_t>(c)]; }
};

struct SplitIndices {
    std::vector<int> train, val, test;
};

struct WindowedDataset {
    std::vector<SensorWindow> windows;
    SplitIndices splits;
    std::vector<int64_t> class_counts;      // per-class window counts over all windows
    std::vector<std::string> class_names;   // may be empty (synthetic data)
    Normalization normalization;
    int num_classes = 0;

    int channels() const { return windows.empty() ? 0 : windows.front().channels(); }
    int width() const { return windows.empty() ? 0 : windows.front().width(); }
};

inline constexpr float kSigmaFloor = 1e-8f;

/// Number of windows a sliding pass produces: floor((L - size)/step) + 1,
/// zero when the stream is shorter than one window.
inline int64_t window_count(int64_t stream_len, int size, int step) {
    if (stream_len < size) return 0;
    return (stream_len - size) / step + 1;
}

/// Slide a window of `size` samples by `step` over the stream. The tail
/// shorter than `size` is dropped. Each window takes the majority label of
/// its samples; windows with a tied majority are dropped.
inline std::vector<SensorWindow> window(const Stream& stream, int size, int step) {
    require(size >= 1, "window: size must be >= 1, got ", size);
    require(step >= 1 && step <= size, "window: step ", step, " must be in [1, size=", size, "]");
    std::vector<SensorWindow> out;
    const int C = stream.channels();
    const int T = stream.length();
    if (T < size) return out;
    require(static_cast<int>(stream.labels.size()) == T,
            "window: stream has ", stream.labels.size(), " labels for ", T, " samples");

    for (int64_t off = 0; off + size <= T; off += step) {
        std::map<int, int> counts;
        for (int i = 0; i < size; ++i) ++counts[stream.labels[static_cast<size_t>(off + i)]];
        int best_label = -1, best_count = 0;
        bool tied = false;
        for (const auto& [label, count] : counts) {
            if (count > best_count) {
                best_label = label;
                best_count = count;
                tied = false;
            } else if (count == best_count) {
                tied = true;
            }
        }
        if (tied) continue;

        SensorWindow w;
        w.values = TensorF({C, size});
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < size; ++i)
                w.values.at(c, i) = stream.values.at(c, static_cast<int>(off) + i);
        w.label = best_label;
        w.subject = stream.subject;
        w.t_start = off;
        out.push_back(std::move(w));
    }
    return out;
}

/// Stratified random split by window (default) or by subject, with fixed
/// fractions. Splits are disjoint and cover all windows.
inline SplitIndices split_windows(const std::vector<SensorWindow>& windows, double train_frac,
                                  double val_frac, bool subject_wise, uint64_t seed) {
    require(train_frac > 0 && val_frac >= 0 && train_frac + val_frac < 1.0 + 1e-9,
            "split: fractions train=", train_frac, " val=", val_frac, " invalid");
    SplitIndices s;
    Rng rng(Rng::derive(seed, 0x51117));

    if (subject_wise) {
        std::vector<int> subjects;
        for (const auto& w : windows)
            if (std::find(subjects.begin(), subjects.end(), w.subject) == subjects.end())
                subjects.push_back(w.subject);
        std::sort(subjects.begin(), subjects.end());
        rng.shuffle(subjects);
        const size_t n_train = static_cast<size_t>(std::round(train_frac * subjects.size()));
        const size_t n_val = static_cast<size_t>(std::round(val_frac * subjects.size()));
        auto bucket = [&](int subj) {
            const size_t pos = static_cast<size_t>(
                std::find(subjects.begin(), subjects.end(), subj) - subjects.begin());
            if (pos < n_train) return 0;
            if (pos < n_train + n_val) return 1;
            return 2;
        };
        for (size_t i = 0; i < windows.size(); ++i) {
            switch (bucket(windows[i].subject)) {
                case 0: s.train.push_back(static_cast<int>(i)); break;
                case 1: s.val.push_back(static_cast<int>(i)); break;
                default: s.test.push_back(static_cast<int>(i)); break;
            }
        }
        return s;
    }

    // stratified by label: shuffle within each class, then cut by fraction
    std::map<int, std::vector<int>> by_class;
    for (size_t i = 0; i < windows.size(); ++i)
        by_class[windows[i].label].push_back(static_cast<int>(i));
    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        const size_t n = idx.size();
        const size_t n_train = static_cast<size_t>(std::round(train_frac * n));
        const size_t n_val = static_cast<size_t>(std::round(val_frac * n));
        for (size_t i = 0; i < n; ++i) {
            if (i < n_train) s.train.push_back(idx[i]);
            else if (i < n_train + n_val) s.val.push_back(idx[i]);
            else s.test.push_back(idx[i]);
        }
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

/// Per-channel mean/std over train-split windows only; sigma floored so dead
/// channels normalize to zero instead of dividing by zero.
inline Normalization compute_normalization(const std::vector<SensorWindow>& windows,
                                           const std::vector<int>& train_idx) {
    require(!windows.empty(), "normalization: dataset is empty");
    require(!train_idx.empty(), "normalization: train split is empty");
    const int C = windows.front().channels();
    Normalization norm;
    norm.mean.assign(static_cast<size_t>(C), 0.0f);
    norm.stddev.assign(static_cast<size_t>(C), 1.0f);

    for (int c = 0; c < C; ++c) {
        double sum = 0.0;
        int64_t n = 0;
        for (int idx : train_idx) {
            const SensorWindow& w = windows[static_cast<size_t>(idx)];
            for (int i = 0; i < w.width(); ++i) sum += w.values.at(c, i);
            n += w.width();
        }
        const double mu = sum / static_cast<double>(n);
        double var = 0.0;
        for (int idx : train_idx) {
            const SensorWindow& w = windows[static_cast<size_t>(idx)];
            for (int i = 0; i < w.width(); ++i) {
                const double d = w.values.at(c, i) - mu;
                var += d * d;
            }
        }
        var /= static_cast<double>(n);
        norm.mean[static_cast<size_t>(c)] = static_cast<float>(mu);
        norm.stddev[static_cast<size_t>(c)] =
            std::max(static_cast<float>(std::sqrt(var)), kSigmaFloor);
    }
    return norm;
}

inline std::vector<int64_t> count_classes(const std::vector<SensorWindow>& windows,
                                          int num_classes) {
    std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
    for (const auto& w : windows) {
        require(w.label >= 0 && w.label < num_classes, "window label ", w.label,
                " out of range [0,", num_classes, ")");
        ++counts[static_cast<size_t>(w.label)];
    }
    return counts;
}

/// Assembles a WindowedDataset from labeled streams: window, split, normalize.
struct IngestOptions {
    int window_size = 90;
    int window_step = 45;  // training-time default: 50% of the window
    double train_frac = 0.70;
    double val_frac = 0.15;
    bool subject_wise = false;
    uint64_t seed = 1;
};

inline WindowedDataset build_dataset(const std::vector<Stream>& streams, int num_classes,
                                     const IngestOptions& opts,
                                     std::vector<std::string> class_names = {}) {
    WindowedDataset ds;
    ds.num_classes = num_classes;
    ds.class_names = std::move(class_names);
    for (const auto& st : streams) {
        auto ws = window(st, opts.window_size, opts.window_step);
        for (auto& w : ws) ds.windows.push_back(std::move(w));
    }
    require(!ds.windows.empty(), "ingest produced no windows (streams shorter than ",
            opts.window_size, " samples?)");
    ds.splits = split_windows(ds.windows, opts.train_frac, opts.val_frac, opts.subject_wise,
                              opts.seed);
    require(!ds.splits.train.empty(), "ingest: train split is empty");
    ds.class_counts = count_classes(ds.windows, num_classes);
    ds.normalization = compute_normalization(ds.windows, ds.splits.train);
    return ds;
}

/// Synthetic desk-scale stand-in dataset: class k is a sinusoid of frequency
/// f_k = k+1 cycles per window riding on a class-specific DC offset, plus
/// seeded Gaussian noise per channel. Deterministic for a fixed seed.
struct SyntheticSpec {
    int classes = 3;
    int channels = 3;
    int window = 90;
    std::vector<int> per_class;  // window counts; empty = 100 each
    double noise_std = 0.1;
    double amplitude = 1.0;
    double offset_base = 1.0;  // class k offset = offset_base + offset_step * k
    double offset_step = 1.0;
    uint64_t seed = 7;
    double train_frac = 0.70;
    double val_frac = 0.15;
};

inline WindowedDataset make_synthetic_dataset(const SyntheticSpec& spec) {
    require(spec.classes >= 1 && spec.channels >= 1 && spec.window >= 2,
            "synthetic spec: classes/channels/window out of range");
    std::vector<int> per_class = spec.per_class;
    if (per_class.empty()) per_class.assign(static_cast<size_t>(spec.classes), 100);
    require(static_cast<int>(per_class.size()) == spec.classes,
            "synthetic spec: per_class has ", per_class.size(), " entries for ",
            spec.classes, " classes");

    WindowedDataset ds;
    ds.num_classes = spec.classes;
    Rng rng(Rng::derive(spec.seed, 0xda7a));
    const double two_pi = 2.0 * 3.14159265358979323846;
    int subject = 0;
    for (int k = 0; k < spec.classes; ++k) {
        const double freq = static_cast<double>(k + 1);
        const double offset = spec.offset_base + spec.offset_step * k;
        for (int i = 0; i < per_class[static_cast<size_t>(k)]; ++i) {
            SensorWindow w;
            w.values = TensorF({spec.channels, spec.window});
            w.label = k;
            w.subject = subject++ % 5;
            const double phase = rng.uniform(0.0, two_pi);
            for (int c = 0; c < spec.channels; ++c) {
                const double ch_phase = phase + c * two_pi / 8.0;
                for (int t = 0; t < spec.window; ++t) {
                    const double s = offset +
                                     spec.amplitude *
                                         std::sin(two_pi * freq * t / spec.window + ch_phase) +
                                     spec.noise_std * rng.normal();
                    w.values.at(c, t) = static_cast<float>(s);
                }
            }
            ds.windows.push_back(std::move(w));
        }
    }
    ds.splits = split_windows(ds.windows, spec.train_frac, spec.val_frac, false,
                              Rng::derive(spec.seed, 0x5b7));
    ds.class_counts = count_classes(ds.windows, spec.classes);
    ds.normalization = compute_normalization(ds.windows, ds.splits.train);
    return ds;
}

}  // namespace har
