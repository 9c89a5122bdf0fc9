#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "har/bench/bench.hpp"
#include "har/bench/reference_cnn.hpp"
#include "har/core/checkpoint.hpp"
#include "har/data/cache.hpp"
#include "har/data/wisdm.hpp"
#include "har/metrics/metrics.hpp"
#include "har/msti/model.hpp"
#include "har/pipeline/config.hpp"
#include "har/synth/diffusion.hpp"
#include "har/train/trainer.hpp"

namespace har {

namespace fs = std::filesystem;

/// Failure of one pipeline stage; partial artifacts written so far remain on
/// disk.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& msg)
        : Error("stage " + stage + ": " + msg), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

inline void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    require(out.good(), "cannot write ", path.string());
    out << content;
}

inline void write_json_file(const fs::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline std::vector<const SensorWindow*> gather(const std::vector<SensorWindow>& windows,
                                               const std::vector<int>& idx) {
    std::vector<const SensorWindow*> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(&windows[static_cast<size_t>(i)]);
    return out;
}

// ---- stages ----------------------------------------------------------------

inline WindowedDataset stage_ingest(const RunConfig& cfg) {
    try {
        if (cfg.data.kind == "synthetic") return make_synthetic_dataset(cfg.synthetic_spec());
        if (cfg.data.kind == "cache") return load_dataset_cache(cfg.data.path);

        RawStreams raw = cfg.data.kind == "wisdm" ? load_wisdm_csv(cfg.data.path)
                                                  : load_generic_csv(cfg.data.path);
        IngestOptions opts;
        opts.window_size = cfg.data.window;
        opts.window_step = cfg.data.step;
        opts.train_frac = cfg.data.train_frac;
        opts.val_frac = cfg.data.val_frac;
        opts.subject_wise = cfg.data.subject_wise;
        opts.seed = Rng::derive(cfg.seed, 0x516);
        int num_classes = static_cast<int>(raw.class_names.size());
        if (cfg.data.kind == "generic_csv") {
            for (const auto& st : raw.streams)
                for (int l : st.labels) num_classes = std::max(num_classes, l + 1);
        }
        return build_dataset(raw.streams, num_classes, opts, raw.class_names);
    } catch (const Error& e) {
        throw StageError("ingest", e.what());
    }
}

inline nlohmann::json dataset_summary(const WindowedDataset& ds) {
    nlohmann::json j;
    j["num_windows"] = ds.windows.size();
    j["channels"] = ds.channels();
    j["window"] = ds.width();
    j["num_classes"] = ds.num_classes;
    j["class_counts"] = ds.class_counts;
    j["class_names"] = ds.class_names;
    j["split_sizes"] = {{"train", ds.splits.train.size()},
                        {"val", ds.splits.val.size()},
                        {"test", ds.splits.test.size()}};
    j["normalization"] = {{"mean", ds.normalization.mean}, {"std", ds.normalization.stddev}};
    return j;
}

struct SynthArtifacts {
    std::vector<double> pretrain_trace;
    std::vector<SensorWindow> generated;
};

/// Diffusion phase: pretrain the denoiser on raw train-split windows, then
/// generate per-class windows conditioned on each class's train statistics.
inline SynthArtifacts stage_synth(const RunConfig& cfg, const WindowedDataset& ds,
                                  Denoiser& denoiser) {
    try {
        DiffusionSchedule sched = DiffusionSchedule::linear(
            cfg.synth.diffusion_steps, cfg.synth.beta_start, cfg.synth.beta_end);
        PretrainOptions popts;
        popts.steps = cfg.synth.pretrain_steps;
        popts.batch_size = cfg.synth.pretrain_batch;
        popts.lr = cfg.synth.pretrain_lr;
        popts.seed = Rng::derive(cfg.seed, 0x9321);

        SynthArtifacts art;
        art.pretrain_trace = pretrain(denoiser, ds.windows, ds.splits.train, sched, popts);

        int64_t max_count = 0;
        std::vector<int64_t> train_counts(static_cast<size_t>(ds.num_classes), 0);
        for (int i : ds.splits.train) ++train_counts[static_cast<size_t>(ds.windows[static_cast<size_t>(i)].label)];
        for (int64_t c : train_counts) max_count = std::max(max_count, c);

        for (int k = 0; k < ds.num_classes; ++k) {
            if (train_counts[static_cast<size_t>(k)] == 0) continue;
            // default: top minority classes up to the largest class's count
            const int count =
                cfg.synth.per_class > 0
                    ? cfg.synth.per_class
                    : static_cast<int>(max_count - train_counts[static_cast<size_t>(k)]);
            StatFeatures f = class_features(ds.windows, ds.splits.train, k);
            GenerateOptions gopts;
            gopts.refine_steps = cfg.synth.refine_steps;
            gopts.seed = Rng::derive(cfg.seed, 0xabc0 + static_cast<uint64_t>(k));
            auto gen = generate(denoiser, f, count, k, gopts);
            for (auto& w : gen) art.generated.push_back(std::move(w));
        }
        return art;
    } catch (const Error& e) {
        throw StageError("synth", e.what());
    }
}

struct TrainArtifacts {
    FitResult synth_phase;  // empty trace when synthesis disabled
    FitResult real_phase;
};

inline TrainArtifacts stage_train(const RunConfig& cfg, const WindowedDataset& ds,
                                  const std::vector<SensorWindow>& generated, MstiModel& model) {
    try {
        TrainArtifacts art;
        auto train_ptr = gather(ds.windows, ds.splits.train);
        auto val_ptr = gather(ds.windows, ds.splits.val);

        if (cfg.synth.enabled && !generated.empty()) {
            std::vector<const SensorWindow*> synth_train;
            for (const auto& w : generated) synth_train.push_back(&w);
            if (cfg.synth.mix_real)
                for (const auto* w : train_ptr) synth_train.push_back(w);
            art.synth_phase = fit(model, synth_train, val_ptr, ds.normalization,
                                  cfg.fit_schedule(Rng::derive(cfg.seed, 0xf175)));
        }
        art.real_phase = fit(model, train_ptr, val_ptr, ds.normalization,
                             cfg.fit_schedule(Rng::derive(cfg.seed, 0xf17e)));
        return art;
    } catch (const Error& e) {
        throw StageError("train", e.what());
    }
}

struct EvalArtifacts {
    ConfusionMatrix cm;
    MetricsReport report;
};

inline EvalArtifacts stage_eval(const WindowedDataset& ds, MstiModel& model) {
    try {
        const std::vector<int>& idx = !ds.splits.test.empty() ? ds.splits.test : ds.splits.val;
        require(!idx.empty(), "no test or validation windows to evaluate");
        auto windows = gather(ds.windows, idx);
        std::vector<int> preds = predict(model, windows, ds.normalization);
        std::vector<int> targets;
        targets.reserve(windows.size());
        for (const auto* w : windows) targets.push_back(w->label);
        EvalArtifacts art;
        art.cm = confusion(preds, targets, ds.num_classes, ds.class_names);
        art.report = metrics(art.cm);
        return art;
    } catch (const Error& e) {
        throw StageError("eval", e.what());
    }
}

struct BenchArtifacts {
    ComplexityReport complexity;
    LatencyReport latency;
    LatencyReport latency_reference;
};

inline BenchArtifacts stage_bench(const RunConfig& cfg, const WindowedDataset& ds,
                                  MstiModel& model, const std::string& config_hash) {
    try {
        const int C = ds.channels(), W = ds.width();
        BenchArtifacts art;
        art.complexity = count_params(model, C, W);

        // fixed segment: the first evaluation window, normalized
        const std::vector<int>& idx = !ds.splits.test.empty() ? ds.splits.test : ds.splits.train;
        TensorF seg({1, C, W});
        const SensorWindow& w0 = ds.windows[static_cast<size_t>(idx.front())];
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < W; ++i)
                seg.at(0, c, i) = ds.normalization.apply(w0.values.at(c, i), c);

        art.latency = latency_run(model, seg, cfg.bench.runs, cfg.bench.warmup,
                                  cfg.bench.deadline_ms, "msti", config_hash);
        ReferenceCnn ref(C, W, ds.num_classes, cfg.seed);
        art.latency_reference = latency_run(ref, seg, cfg.bench.runs, cfg.bench.warmup,
                                            cfg.bench.deadline_ms, "reference_cnn", config_hash);
        return art;
    } catch (const Error& e) {
        throw StageError("bench", e.what());
    }
}

// ---- end-to-end ------------------------------------------------------------

struct PipelineResult {
    fs::path run_dir;
    MetricsReport metrics;
    ComplexityReport complexity;
    double p95_ms = 0;
};

inline fs::path output_root() {
    if (const char* env = std::getenv("HAR_OUT_ROOT")) return env;
    return "runs";
}

/// Executes ingest -> (optional) synth -> train -> eval -> bench, writing all
/// artifacts under the run directory. Files compared for reproducibility
/// (metrics.json, checkpoint) contain no timing or host-dependent content.
inline PipelineResult run_pipeline(const RunConfig& cfg, std::ostream& log = std::cout) {
    const std::string config_hash = cfg.hash();
    fs::path run_dir;
    if (!cfg.out_dir.empty()) {
        run_dir = cfg.out_dir;
    } else {
        std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", std::localtime(&now));
        run_dir = output_root() / fs::path(str("run-", stamp, "-", config_hash.substr(0, 8)));
    }
    fs::create_directories(run_dir);
    write_json_file(run_dir / "config.json", cfg.to_json());
    log << "run dir: " << run_dir.string() << "\n";

    WindowedDataset ds = stage_ingest(cfg);
    write_json_file(run_dir / "dataset.json", dataset_summary(ds));
    log << "ingest: " << ds.windows.size() << " windows, " << ds.num_classes << " classes\n";

    if (ds.num_classes != cfg.model.num_classes)
        throw StageError("ingest", str("dataset has ", ds.num_classes,
                                       " classes but model.num_classes is ",
                                       cfg.model.num_classes));

    std::vector<SensorWindow> generated;
    if (cfg.synth.enabled) {
        DenoiserConfig dc;
        dc.channels = ds.channels();
        dc.window = ds.width();
        dc.hidden = cfg.synth.hidden;
        Denoiser denoiser(dc, Rng::derive(cfg.seed, 0xd10d));
        SynthArtifacts sa = stage_synth(cfg, ds, denoiser);
        std::ostringstream trace;
        trace << "step,l_rec\n";
        trace.precision(10);
        for (size_t i = 0; i < sa.pretrain_trace.size(); ++i)
            trace << i << "," << sa.pretrain_trace[i] << "\n";
        write_text_file(run_dir / "synth_trace.csv", trace.str());
        save_checkpoint(run_dir / "denoiser", denoiser.named_tensors(), config_hash);
        generated = std::move(sa.generated);

        WindowedDataset synth_ds;
        synth_ds.windows = generated;
        synth_ds.num_classes = ds.num_classes;
        synth_ds.class_counts = count_classes(synth_ds.windows, ds.num_classes);
        synth_ds.normalization = ds.normalization;
        for (size_t i = 0; i < synth_ds.windows.size(); ++i)
            synth_ds.splits.train.push_back(static_cast<int>(i));
        save_dataset_cache(run_dir / "synthetic", synth_ds);
        log << "synth: " << generated.size() << " generated windows, final L_rec = "
            << (sa.pretrain_trace.empty() ? 0.0 : sa.pretrain_trace.back()) << "\n";
    }

    MstiModel model(cfg.msti_config(ds.channels(), ds.width()), Rng::derive(cfg.seed, 0x30de1));
    TrainArtifacts ta = stage_train(cfg, ds, generated, model);
    if (!ta.synth_phase.trace.empty())
        write_text_file(run_dir / "train_syn_trace.csv", trace_csv(ta.synth_phase.trace));
    write_text_file(run_dir / "train_trace.csv", trace_csv(ta.real_phase.trace));
    save_checkpoint(run_dir / "checkpoint", model.named_tensors(), config_hash);
    log << "train: best val acc " << ta.real_phase.best_val_acc << " at epoch "
        << ta.real_phase.best_epoch << "\n";

    EvalArtifacts ea = stage_eval(ds, model);
    nlohmann::json mj = metrics_to_json(ea.report, ea.cm);
    mj["config_hash"] = config_hash;
    write_json_file(run_dir / "metrics.json", mj);
    write_confusion_csv(ea.cm, (run_dir / "confusion.csv").string(), false);
    write_confusion_csv(ea.cm, (run_dir / "confusion_pct.csv").string(), true);
    log << "eval: accuracy " << ea.report.accuracy_pct << "%\n";

    BenchArtifacts ba = stage_bench(cfg, ds, model, config_hash);
    nlohmann::json cj;
    cj["param_count"] = ba.complexity.param_count;
    cj["param_bytes"] = ba.complexity.param_bytes;
    cj["activation_bytes"] = ba.complexity.activation_bytes;
    cj["resident_bytes_informational"] = ba.complexity.resident_bytes;
    write_json_file(run_dir / "complexity.json", cj);
    write_latency_csv(ba.latency, (run_dir / "latency.csv").string());
    write_json_file(run_dir / "latency.json", latency_to_json(ba.latency));
    write_latency_histogram(ba.latency, (run_dir / "latency_hist.dat").string());
    write_json_file(run_dir / "latency_reference_cnn.json",
                    latency_to_json(ba.latency_reference));
    log << "bench: " << ba.complexity.param_count << " params, p95 " << ba.latency.p95_ms
        << " ms (reference cnn p95 " << ba.latency_reference.p95_ms << " ms)\n";

    PipelineResult result;
    result.run_dir = run_dir;
    result.metrics = ea.report;
    result.complexity = ba.complexity;
    result.p95_ms = ba.latency.p95_ms;
    return result;
}

// ---- report ----------------------------------------------------------------

struct ReportRow {
    std::string run;
    bool complete = false;
    double acc_pct = 0, f1_weighted = 0, gmean_paper = 0, gmean_standard = 0;
    int64_t params = 0;
    double p95_ms = 0;
};

/// Consolidates completed runs under `dir` into one comparison table, sorted
/// by accuracy. Runs missing their metrics are flagged incomplete rather than
/// failing the report.
inline std::vector<ReportRow> collect_report(const fs::path& dir) {
    require(fs::is_directory(dir), "report: not a directory: ", dir.string());
    std::vector<ReportRow> rows;
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "config.json"))
            entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    require(!entries.empty(), "report: no completed runs under ", dir.string());

    for (const auto& run : entries) {
        ReportRow row;
        row.run = run.filename().string();
        try {
            std::ifstream mf(run / "metrics.json");
            require(mf.good(), "missing metrics");
            nlohmann::json m = nlohmann::json::parse(mf);
            row.acc_pct = m.at("accuracy_pct").get<double>();
            row.f1_weighted = m.at("f1_weighted").get<double>();
            row.gmean_paper = m.at("gmean_paper").get<double>();
            row.gmean_standard = m.at("gmean_standard").get<double>();
            std::ifstream cf(run / "complexity.json");
            if (cf.good()) row.params = nlohmann::json::parse(cf).at("param_count").get<int64_t>();
            std::ifstream lf(run / "latency.json");
            if (lf.good()) row.p95_ms = nlohmann::json::parse(lf).at("p95_ms").get<double>();
            row.complete = true;
        } catch (const std::exception&) {
            row.complete = false;
        }
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return a.acc_pct > b.acc_pct;
    });
    return rows;
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "run,acc_pct,f1_weighted,gmean_paper,gmean_standard,params,p95_ms\n";
    out.precision(6);
    out << std::fixed;
    for (const auto& r : rows) {
        if (r.complete)
            out << r.run << "," << r.acc_pct << "," << r.f1_weighted << "," << r.gmean_paper
                << "," << r.gmean_standard << "," << r.params << "," << r.p95_ms << "\n";
        else
            out << r.run << ",incomplete,,,,,\n";
    }
    return out.str();
}

inline std::string report_table(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %8s %12s %12s %14s %10s %9s\n", "run", "acc_pct",
                  "f1_weighted", "gmean_paper", "gmean_std", "params", "p95_ms");
    out << line;
    for (const auto& r : rows) {
        if (r.complete) {
            std::snprintf(line, sizeof line, "%-40s %8.2f %12.4f %12.4f %14.4f %10lld %9.3f\n",
                          r.run.c_str(), r.acc_pct, r.f1_weighted, r.gmean_paper,
                          r.gmean_standard, static_cast<long long>(r.params), r.p95_ms);
        } else {
            std::snprintf(line, sizeof line, "%-40s %s\n", r.run.c_str(), "[incomplete]");
        }
        out << line;
    }
    return out.str();
}

}  // namespace har
