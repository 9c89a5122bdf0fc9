#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "har/core/graph.hpp"
#include "har/core/random.hpp"
#include "har/data/dataset.hpp"
#include "har/train/adam.hpp"
#include "har/train/losses.hpp"

namespace har {

enum class LossMode { kCeOnly, kFixed, kAdaptive };

inline const char* loss_mode_name(LossMode m) {
    switch (m) {
        case LossMode::kCeOnly: return "ce_only";
        case LossMode::kFixed: return "fixed";
        default: return "adaptive";
    }
}

struct FitSchedule {
    int epochs = 10;
    int batch_size = 32;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8, weight_decay = 1e-4;
    LossMode mode = LossMode::kAdaptive;
    LossWeights weights;  // initial weights; fixed for kFixed
    FocalParams focal;
    bool adapt_on_val = false;  // feed validation instead of training accuracy to the update
    uint64_t seed = 1;
};

struct EpochRecord {
    int epoch = 0;
    double loss_ce = 0, loss_fl = 0, loss_sl = 0, loss_total = 0;
    double w0 = 0, w1 = 0, w2 = 0;
    double train_acc = 0, val_acc = 0;
};

struct FitResult {
    std::vector<EpochRecord> trace;
    double best_val_acc = 0.0;
    int best_epoch = -1;
    LossWeights final_weights;
};

/// Normalized batch tensor [B,C,W] from window pointers.
inline TensorF make_batch(const std::vector<const SensorWindow*>& windows,
                          const std::vector<int>& order, size_t from, size_t count,
                          const Normalization& norm) {
    const int C = windows.front()->channels();
    const int W = windows.front()->width();
    TensorF x({static_cast<int>(count), C, W});
    for (size_t b = 0; b < count; ++b) {
        const SensorWindow& w = *windows[static_cast<size_t>(order[from + b])];
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < W; ++i)
                x.at(static_cast<int>(b), c, i) = norm.apply(w.values.at(c, i), c);
    }
    return x;
}

inline int argmax_row(const TensorF& t, int row) {
    int best = 0;
    for (int k = 1; k < t.dim(1); ++k)
        if (t.at(row, k) > t.at(row, best)) best = k;
    return best;
}

/// Eval-mode predictions over a window list.
template <typename Model>
std::vector<int> predict(Model& model, const std::vector<const SensorWindow*>& windows,
                         const Normalization& norm, int batch_size = 64) {
    std::vector<int> preds;
    preds.reserve(windows.size());
    std::vector<int> order(windows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (size_t at = 0; at < windows.size(); at += static_cast<size_t>(batch_size)) {
        const size_t n = std::min(static_cast<size_t>(batch_size), windows.size() - at);
        Graph g;
        Var logits = model.forward(g, g.value(make_batch(windows, order, at, n, norm)), false);
        const TensorF& lv = g.val(logits);
        for (size_t b = 0; b < n; ++b) preds.push_back(argmax_row(lv, static_cast<int>(b)));
    }
    return preds;
}

template <typename Model>
double accuracy_on(Model& model, const std::vector<const SensorWindow*>& windows,
                   const Normalization& norm, int batch_size = 64) {
    if (windows.empty()) return 0.0;
    const std::vector<int> preds = predict(model, windows, norm, batch_size);
    int64_t correct = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == windows[i]->label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(windows.size());
}

/// Snapshot/restore of a model's named tensors (parameters + buffers).
template <typename Model>
std::vector<TensorF> snapshot_tensors(Model& model) {
    std::vector<TensorF> out;
    for (auto& [name, t] : model.named_tensors()) out.push_back(*t);
    return out;
}

template <typename Model>
void restore_tensors(Model& model, const std::vector<TensorF>& snap) {
    auto named = model.named_tensors();
    require(named.size() == snap.size(), "restore: snapshot holds ", snap.size(),
            " tensors, model has ", named.size());
    for (size_t i = 0; i < named.size(); ++i) *named[i].second = snap[i];
}

/// Trains a classifier with the composite loss. One optimizer owns the model
/// for the duration of the call; the best-validation tensors are restored
/// into the model before returning. Deterministic for a fixed seed.
template <typename Model>
FitResult fit(Model& model, const std::vector<const SensorWindow*>& train,
              const std::vector<const SensorWindow*>& val, const Normalization& norm,
              const FitSchedule& sched) {
    require(!train.empty(), "fit: train split is empty");
    require(sched.epochs >= 1 && sched.batch_size >= 1, "fit: epochs/batch_size invalid");
    const int num_classes = model.num_classes();

    Adam adam;
    adam.lr = sched.lr;
    adam.beta1 = sched.beta1;
    adam.beta2 = sched.beta2;
    adam.eps = sched.adam_eps;
    adam.weight_decay = sched.weight_decay;
    auto params = model.parameters();
    adam.attach(params);

    Rng shuffle_rng(Rng::derive(sched.seed, 0x5u));
    LossWeights weights = sched.mode == LossMode::kCeOnly ? LossWeights::ce_only()
                                                          : sched.weights;

    FitResult result;
    std::vector<TensorF> best_snapshot;
    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < sched.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double sum_ce = 0, sum_fl = 0, sum_sl = 0, sum_total = 0;
        int64_t batches = 0, correct = 0;

        for (size_t at = 0; at < train.size(); at += static_cast<size_t>(sched.batch_size)) {
            const size_t n = std::min(static_cast<size_t>(sched.batch_size), train.size() - at);
            std::vector<int> targets(n);
            for (size_t b = 0; b < n; ++b)
                targets[b] = train[static_cast<size_t>(order[at + b])]->label;

            Graph g;
            Var x = g.value(make_batch(train, order, at, n, norm));
            Var logits = model.forward(g, x, true);
            Var probs = g.softmax(logits, 1);

            Var l_ce = loss_ce(g, probs, targets);
            Var l_fl = loss_focal(g, probs, targets, sched.focal.alpha_t, sched.focal.gamma);
            Var l_sl = loss_smoothed_nll(g, probs, targets, sched.focal.eps_smooth, num_classes);
            Var loss = sched.mode == LossMode::kCeOnly
                           ? l_ce
                           : total_loss(g, l_sl, l_fl, l_ce, weights);

            const double lv = static_cast<double>(g.val(loss)[0]);
            require(std::isfinite(lv), "fit: non-finite loss ", lv, " at epoch ", epoch,
                    ", batch ", batches, " (aborting)");
            sum_ce += static_cast<double>(g.val(l_ce)[0]);
            sum_fl += static_cast<double>(g.val(l_fl)[0]);
            sum_sl += static_cast<double>(g.val(l_sl)[0]);
            sum_total += lv;
            ++batches;

            const TensorF& lt = g.val(logits);
            for (size_t b = 0; b < n; ++b)
                if (argmax_row(lt, static_cast<int>(b)) == targets[b]) ++correct;

            adam.zero_grads(params);
            g.backward(loss);
            adam.step(params);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_ce = sum_ce / static_cast<double>(batches);
        rec.loss_fl = sum_fl / static_cast<double>(batches);
        rec.loss_sl = sum_sl / static_cast<double>(batches);
        rec.loss_total = sum_total / static_cast<double>(batches);
        rec.w0 = weights.w0;
        rec.w1 = weights.w1;
        rec.w2 = weights.w2;
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
        rec.val_acc = accuracy_on(model, val, norm, sched.batch_size);
        result.trace.push_back(rec);

        if (result.best_epoch < 0 || rec.val_acc > result.best_val_acc) {
            result.best_val_acc = rec.val_acc;
            result.best_epoch = epoch;
            best_snapshot = snapshot_tensors(model);
        }

        if (sched.mode == LossMode::kAdaptive)
            weights = adapt_weights(weights, sched.adapt_on_val ? rec.val_acc : rec.train_acc);
    }

    if (!best_snapshot.empty()) restore_tensors(model, best_snapshot);
    result.final_weights = weights;
    return result;
}

/// Trace CSV with one row per epoch.
inline std::string trace_csv(const std::vector<EpochRecord>& trace) {
    std::ostringstream out;
    out << "epoch,loss_ce,loss_fl,loss_sl,loss_total,w0,w1,w2,train_acc,val_acc\n";
    out.precision(10);
    for (const auto& r : trace)
        out << r.epoch << "," << r.loss_ce << "," << r.loss_fl << "," << r.loss_sl << ","
            << r.loss_total << "," << r.w0 << "," << r.w1 << "," << r.w2 << "," << r.train_acc
            << "," << r.val_acc << "\n";
    return out.str();
}

}  // namespace har
