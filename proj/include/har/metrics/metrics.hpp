#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "har/core/error.hpp"

namespace har {

/// Integer confusion grid; rows are true classes, columns predictions.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<int64_t> counts;  // row-major [num_classes, num_classes]
    std::vector<std::string> class_names;

    int64_t& at(int t, int p) { return counts[static_cast<size_t>(t) * num_classes + p]; }
    int64_t at(int t, int p) const { return counts[static_cast<size_t>(t) * num_classes + p]; }
    int64_t total() const {
        int64_t n = 0;
        for (int64_t c : counts) n += c;
        return n;
    }
};

inline ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& targets,
                                 int num_classes, std::vector<std::string> class_names = {}) {
    require(preds.size() == targets.size(), "confusion: ", preds.size(), " predictions vs ",
            targets.size(), " targets");
    require(num_classes >= 1, "confusion: num_classes must be >= 1");
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(static_cast<size_t>(num_classes) * num_classes, 0);
    cm.class_names = std::move(class_names);
    for (size_t i = 0; i < preds.size(); ++i) {
        require(targets[i] >= 0 && targets[i] < num_classes, "confusion: target id ",
                targets[i], " out of range [0,", num_classes, ")");
        require(preds[i] >= 0 && preds[i] < num_classes, "confusion: prediction id ",
                preds[i], " out of range [0,", num_classes, ")");
        ++cm.at(targets[i], preds[i]);
    }
    return cm;
}

struct ClassMetrics {
    int64_t support = 0;
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    double gmean_paper = 0.0;     // sqrt(TPR + TNR), as printed
    double gmean_standard = 0.0;  // sqrt(TPR * TNR)
    bool zero_support = false;
};

/// Classification metrics from a confusion matrix. Multiclass values use
/// one-vs-rest counts per class; macro aggregates are unweighted means and
/// weighted aggregates use class supports. Both G-mean forms are reported:
/// gmean_paper sums TPR and TNR under the root, gmean_standard multiplies
/// them.
struct MetricsReport {
    int64_t num_samples = 0;
    double accuracy = 0.0;  // micro: correct / total
    double accuracy_pct = 0.0;
    std::vector<ClassMetrics> per_class;
    double precision_macro = 0.0, recall_macro = 0.0;
    double f1_macro = 0.0, f1_weighted = 0.0;
    double gmean_paper = 0.0, gmean_standard = 0.0;
    bool has_zero_support_class = false;
};

inline MetricsReport metrics(const ConfusionMatrix& cm) {
    const int64_t total = cm.total();
    require(total > 0, "metrics: confusion matrix is empty");
    MetricsReport r;
    r.num_samples = total;

    int64_t correct = 0;
    for (int k = 0; k < cm.num_classes; ++k) correct += cm.at(k, k);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    r.accuracy_pct = 100.0 * r.accuracy;

    r.per_class.resize(static_cast<size_t>(cm.num_classes));
    double f1_sum = 0.0, f1_wsum = 0.0, prec_sum = 0.0, rec_sum = 0.0;
    double gp_sum = 0.0, gs_sum = 0.0;
    for (int k = 0; k < cm.num_classes; ++k) {
        ClassMetrics& c = r.per_class[static_cast<size_t>(k)];
        for (int t = 0; t < cm.num_classes; ++t)
            for (int p = 0; p < cm.num_classes; ++p) {
                const int64_t n = cm.at(t, p);
                if (t == k && p == k) c.tp += n;
                else if (t == k) c.fn += n;
                else if (p == k) c.fp += n;
                else c.tn += n;
            }
        c.support = c.tp + c.fn;
        c.zero_support = c.support == 0;
        r.has_zero_support_class |= c.zero_support;
        c.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
        c.recall = c.support > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.support) : 0.0;
        c.f1 = c.precision + c.recall > 0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
                                          : 0.0;
        const double tnr =
            c.tn + c.fp > 0 ? static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp) : 0.0;
        c.gmean_paper = std::sqrt(c.recall + tnr);
        c.gmean_standard = std::sqrt(c.recall * tnr);

        prec_sum += c.precision;
        rec_sum += c.recall;
        f1_sum += c.f1;
        f1_wsum += c.f1 * static_cast<double>(c.support) / static_cast<double>(total);
        gp_sum += c.gmean_paper;
        gs_sum += c.gmean_standard;
    }
    const double k = static_cast<double>(cm.num_classes);
    r.precision_macro = prec_sum / k;
    r.recall_macro = rec_sum / k;
    r.f1_macro = f1_sum / k;
    r.f1_weighted = f1_wsum;
    r.gmean_paper = gp_sum / k;
    r.gmean_standard = gs_sum / k;
    return r;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r, const ConfusionMatrix& cm) {
    nlohmann::json j;
    j["num_samples"] = r.num_samples;
    j["accuracy"] = r.accuracy;
    j["accuracy_pct"] = r.accuracy_pct;
    j["precision_macro"] = r.precision_macro;
    j["recall_macro"] = r.recall_macro;
    j["f1_macro"] = r.f1_macro;
    j["f1_weighted"] = r.f1_weighted;
    j["gmean_paper"] = r.gmean_paper;
    j["gmean_standard"] = r.gmean_standard;
    j["has_zero_support_class"] = r.has_zero_support_class;
    nlohmann::json per = nlohmann::json::array();
    for (size_t k = 0; k < r.per_class.size(); ++k) {
        const ClassMetrics& c = r.per_class[k];
        nlohmann::json e;
        e["class"] = k;
        if (k < cm.class_names.size()) e["name"] = cm.class_names[k];
        e["support"] = c.support;
        e["precision"] = c.precision;
        e["recall"] = c.recall;
        e["f1"] = c.f1;
        e["gmean_paper"] = c.gmean_paper;
        e["gmean_standard"] = c.gmean_standard;
        e["zero_support"] = c.zero_support;
        per.push_back(e);
    }
    j["per_class"] = per;
    return j;
}

/// Raw-count confusion CSV; `normalized_pct` instead writes row-normalized
/// percentages (the presentation used for confusion-matrix figures).
inline void write_confusion_csv(const ConfusionMatrix& cm, const std::string& path,
                                bool normalized_pct = false) {
    std::ofstream out(path);
    require(out.good(), "cannot write ", path);
    out << "true\\pred";
    for (int p = 0; p < cm.num_classes; ++p) {
        out << ",";
        if (static_cast<size_t>(p) < cm.class_names.size()) out << cm.class_names[static_cast<size_t>(p)];
        else out << p;
    }
    out << "\n";
    for (int t = 0; t < cm.num_classes; ++t) {
        if (static_cast<size_t>(t) < cm.class_names.size()) out << cm.class_names[static_cast<size_t>(t)];
        else out << t;
        int64_t row_total = 0;
        for (int p = 0; p < cm.num_classes; ++p) row_total += cm.at(t, p);
        for (int p = 0; p < cm.num_classes; ++p) {
            out << ",";
            if (normalized_pct)
                out << (row_total > 0 ? 100.0 * static_cast<double>(cm.at(t, p)) /
                                            static_cast<double>(row_total)
                                      : 0.0);
            else
                out << cm.at(t, p);
        }
        out << "\n";
    }
}

}  // namespace har
