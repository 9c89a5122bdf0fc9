// har: command-line front end for the HAR optimization pipeline.
//
// Subcommands: ingest, synth pretrain|generate, train, eval,
// bench params|latency|stream, pipeline, report. Every flag lists the config
// path it overrides; --config loads a JSON run config and flags win over the
// file. Output root comes from HAR_OUT_ROOT (default ./runs).

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "har/har.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
    std::string config_file;
    std::string preset;
    std::optional<uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "JSON run config file (config: <root>)");
    cmd->add_option("--preset", args.preset,
                    "preset: wisdm|pamap2|opportunity, optionally -synthetic");
    cmd->add_option("--seed", args.seed, "master seed (config: seed)");
    cmd->add_option("--out", args.out_dir, "output directory (config: out_dir)");
}

har::RunConfig resolve_config(const CommonArgs& args) {
    har::RunConfig cfg;
    if (!args.preset.empty()) cfg = har::preset_config(args.preset);
    if (!args.config_file.empty()) {
        std::ifstream in(args.config_file);
        if (!in.good()) throw har::ConfigError("config", "cannot open " + args.config_file);
        json j = json::parse(in, nullptr, true, true);
        if (!args.preset.empty()) {
            // flags from the file override the preset field by field
            json base = cfg.to_json();
            base.merge_patch(j);
            j = base;
        }
        cfg = har::RunConfig::from_json(j);
    }
    if (args.seed) cfg.seed = *args.seed;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    cfg.validate();
    return cfg;
}

har::fs::path ensure_out_dir(const har::RunConfig& cfg, const std::string& fallback) {
    har::fs::path dir = cfg.out_dir.empty() ? har::output_root() / fallback
                                            : har::fs::path(cfg.out_dir);
    har::fs::create_directories(dir);
    return dir;
}

int cmd_ingest(const CommonArgs& args) {
    har::RunConfig cfg = resolve_config(args);
    har::WindowedDataset ds = har::stage_ingest(cfg);
    har::fs::path dir = ensure_out_dir(cfg, "dataset");
    har::save_dataset_cache(dir, ds);
    har::write_json_file(dir / "summary.json", har::dataset_summary(ds));
    std::cout << har::dataset_summary(ds).dump(2) << "\n";
    std::cout << "dataset cache written to " << dir.string() << "\n";
    return 0;
}

int cmd_synth_pretrain(const CommonArgs& args) {
    har::RunConfig cfg = resolve_config(args);
    har::WindowedDataset ds = har::stage_ingest(cfg);
    har::DenoiserConfig dc;
    dc.channels = ds.channels();
    dc.window = ds.width();
    dc.hidden = cfg.synth.hidden;
    har::Denoiser denoiser(dc, har::Rng::derive(cfg.seed, 0xd10d));
    har::SynthArtifacts art = har::stage_synth(cfg, ds, denoiser);

    har::fs::path dir = ensure_out_dir(cfg, "synth");
    std::ostringstream trace;
    trace << "step,l_rec\n";
    trace.precision(10);
    for (size_t i = 0; i < art.pretrain_trace.size(); ++i)
        trace << i << "," << art.pretrain_trace[i] << "\n";
    har::write_text_file(dir / "synth_trace.csv", trace.str());
    har::save_checkpoint(dir / "denoiser", denoiser.named_tensors(), cfg.hash());
    std::cout << "pretrained denoiser: L_rec " << art.pretrain_trace.front() << " -> "
              << art.pretrain_trace.back() << " over " << art.pretrain_trace.size()
              << " steps\n";
    std::cout << "checkpoint written to " << (dir / "denoiser").string() << "\n";
    return 0;
}

int cmd_synth_generate(const CommonArgs& args, const std::string& denoiser_dir, int per_class) {
    har::RunConfig cfg = resolve_config(args);
    if (per_class > 0) cfg.synth.per_class = per_class;
    har::WindowedDataset ds = har::stage_ingest(cfg);
    har::DenoiserConfig dc;
    dc.channels = ds.channels();
    dc.window = ds.width();
    dc.hidden = cfg.synth.hidden;
    har::Denoiser denoiser(dc, har::Rng::derive(cfg.seed, 0xd10d));
    har::load_checkpoint(denoiser_dir, denoiser.named_tensors());

    har::WindowedDataset synth_ds;
    synth_ds.num_classes = ds.num_classes;
    synth_ds.normalization = ds.normalization;
    for (int k = 0; k < ds.num_classes; ++k) {
        const int count = cfg.synth.per_class > 0 ? cfg.synth.per_class : 10;
        har::StatFeatures f = har::class_features(ds.windows, ds.splits.train, k);
        har::GenerateOptions gopts;
        gopts.refine_steps = cfg.synth.refine_steps;
        gopts.seed = har::Rng::derive(cfg.seed, 0xabc0 + static_cast<uint64_t>(k));
        for (auto& w : har::generate(denoiser, f, count, k, gopts))
            synth_ds.windows.push_back(std::move(w));
    }
    synth_ds.class_counts = har::count_classes(synth_ds.windows, ds.num_classes);
    for (size_t i = 0; i < synth_ds.windows.size(); ++i)
        synth_ds.splits.train.push_back(static_cast<int>(i));

    har::fs::path dir = ensure_out_dir(cfg, "synthetic");
    har::save_dataset_cache(dir, synth_ds);
    std::cout << "generated " << synth_ds.windows.size() << " windows into " << dir.string()
              << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    har::RunConfig cfg = resolve_config(args);
    har::WindowedDataset ds = har::stage_ingest(cfg);
    har::MstiModel model(cfg.msti_config(ds.channels(), ds.width()),
                         har::Rng::derive(cfg.seed, 0x30de1));
    std::vector<har::SensorWindow> no_generated;
    har::TrainArtifacts art = har::stage_train(cfg, ds, no_generated, model);

    har::fs::path dir = ensure_out_dir(cfg, "train");
    har::write_text_file(dir / "train_trace.csv", har::trace_csv(art.real_phase.trace));
    har::save_checkpoint(dir / "checkpoint", model.named_tensors(), cfg.hash());
    std::cout << "best val acc " << art.real_phase.best_val_acc << " at epoch "
              << art.real_phase.best_epoch << "\n";
    std::cout << "checkpoint written to " << (dir / "checkpoint").string() << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_dir) {
    har::RunConfig cfg = resolve_config(args);
    har::WindowedDataset ds = har::stage_ingest(cfg);
    har::MstiModel model(cfg.msti_config(ds.channels(), ds.width()),
                         har::Rng::derive(cfg.seed, 0x30de1));
    har::load_checkpoint(checkpoint_dir, model.named_tensors());
    har::EvalArtifacts art = har::stage_eval(ds, model);

    har::fs::path dir = ensure_out_dir(cfg, "eval");
    har::write_json_file(dir / "metrics.json", har::metrics_to_json(art.report, art.cm));
    har::write_confusion_csv(art.cm, (dir / "confusion.csv").string(), false);
    har::write_confusion_csv(art.cm, (dir / "confusion_pct.csv").string(), true);
    std::cout << har::metrics_to_json(art.report, art.cm).dump(2) << "\n";
    return 0;
}

int cmd_bench_params(const CommonArgs& args) {
    har::RunConfig cfg = resolve_config(args);
    const int C = cfg.data.channels, W = cfg.data.window;
    har::MstiModel model(cfg.msti_config(C, W), har::Rng::derive(cfg.seed, 0x30de1));
    har::ComplexityReport r = har::count_params(model, C, W);
    json j;
    j["param_count"] = r.param_count;
    j["param_bytes"] = r.param_bytes;
    j["activation_bytes"] = r.activation_bytes;
    j["resident_bytes_informational"] = r.resident_bytes;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_bench_latency(const CommonArgs& args, const std::string& checkpoint_dir) {
    har::RunConfig cfg = resolve_config(args);
    const int C = cfg.data.channels, W = cfg.data.window;
    har::MstiModel model(cfg.msti_config(C, W), har::Rng::derive(cfg.seed, 0x30de1));
    if (!checkpoint_dir.empty()) har::load_checkpoint(checkpoint_dir, model.named_tensors());

    har::TensorF seg({1, C, W});
    har::Rng rng(har::Rng::derive(cfg.seed, 0x5e6));
    rng.fill_normal(seg);
    har::LatencyReport rep = har::latency_run(model, seg, cfg.bench.runs, cfg.bench.warmup,
                                              cfg.bench.deadline_ms, "msti", cfg.hash());
    har::fs::path dir = ensure_out_dir(cfg, "bench");
    har::write_latency_csv(rep, (dir / "latency.csv").string());
    har::write_json_file(dir / "latency.json", har::latency_to_json(rep));
    har::write_latency_histogram(rep, (dir / "latency_hist.dat").string());
    std::cout << har::latency_to_json(rep).dump(2) << "\n";
    return 0;
}

int cmd_bench_stream(const CommonArgs& args, int stream_windows) {
    har::RunConfig cfg = resolve_config(args);
    if (stream_windows > 0) cfg.bench.stream_windows = stream_windows;
    const int C = cfg.data.channels, W = cfg.data.window;
    har::MstiModel model(cfg.msti_config(C, W), har::Rng::derive(cfg.seed, 0x30de1));

    har::TensorF stream({C, W * cfg.bench.stream_windows});
    har::Rng rng(har::Rng::derive(cfg.seed, 0x57e8));
    rng.fill_normal(stream);
    const int step = std::max(1, W / 20);  // 5% of the window
    const double step_ms = 1000.0 * step / cfg.bench.sample_rate_hz;
    har::StreamReplayReport rep = har::stream_replay(model, stream, W, step, step_ms);

    json j;
    j["segments"] = rep.segments.size();
    j["deadline_ms"] = rep.deadline_ms;
    j["misses"] = rep.misses;
    j["sustainable_fraction"] = rep.sustainable_fraction;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_pipeline(const CommonArgs& args, const std::string& ablation) {
    har::RunConfig cfg = resolve_config(args);
    if (!ablation.empty()) {
        cfg.model.variant = ablation;  // base|spatial|temporal|full
        cfg.validate();
    }
    har::PipelineResult res = har::run_pipeline(cfg);
    std::cout << "pipeline complete: " << res.run_dir.string() << "\n";
    return 0;
}

int cmd_report(const std::string& dir) {
    auto rows = har::collect_report(dir);
    std::cout << har::report_table(rows);
    har::write_text_file(har::fs::path(dir) / "report.csv", har::report_csv(rows));
    std::cout << "report.csv written to " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HAR optimization pipeline: diffusion synthesis, split-attention training, "
                 "metrics, and deployment benchmarking"};
    app.require_subcommand(1);

    CommonArgs args;

    auto* ingest = app.add_subcommand("ingest", "load raw logs, window, split, cache");
    add_common(ingest, args);

    auto* synth = app.add_subcommand("synth", "diffusion synthesizer");
    synth->require_subcommand(1);
    auto* synth_pre = synth->add_subcommand("pretrain", "reconstruction-pretrain the denoiser");
    add_common(synth_pre, args);
    auto* synth_gen = synth->add_subcommand("generate", "generate labeled synthetic windows");
    add_common(synth_gen, args);
    std::string denoiser_dir;
    int gen_per_class = 0;
    synth_gen->add_option("--denoiser", denoiser_dir, "denoiser checkpoint dir")->required();
    synth_gen->add_option("--per-class", gen_per_class,
                          "windows per class (config: synth.per_class)");

    auto* train = app.add_subcommand("train", "train the classifier");
    add_common(train, args);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, args);
    std::string eval_checkpoint;
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint dir")->required();

    auto* bench = app.add_subcommand("bench", "complexity and latency harness");
    bench->require_subcommand(1);
    auto* bench_params = bench->add_subcommand("params", "parameter count and memory estimate");
    add_common(bench_params, args);
    auto* bench_latency = bench->add_subcommand("latency", "single-segment latency distribution");
    add_common(bench_latency, args);
    std::string bench_checkpoint;
    bench_latency->add_option("--checkpoint", bench_checkpoint, "optional checkpoint dir");
    auto* bench_stream = bench->add_subcommand("stream", "sliding-window streaming replay");
    add_common(bench_stream, args);
    int stream_windows = 0;
    bench_stream->add_option("--stream-windows", stream_windows,
                             "stream length in windows (config: bench.stream_windows)");

    auto* pipeline = app.add_subcommand("pipeline", "end-to-end run");
    add_common(pipeline, args);
    std::string ablation;
    pipeline->add_option("--ablation", ablation,
                         "attention variant base|spatial|temporal|full (config: model.variant)");

    auto* report = app.add_subcommand("report", "consolidate runs into a comparison table");
    std::string report_dir;
    report->add_option("dir", report_dir, "directory containing run directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(args);
        if (synth->parsed()) {
            if (synth_pre->parsed()) return cmd_synth_pretrain(args);
            return cmd_synth_generate(args, denoiser_dir, gen_per_class);
        }
        if (train->parsed()) return cmd_train(args);
        if (eval->parsed()) return cmd_eval(args, eval_checkpoint);
        if (bench->parsed()) {
            if (bench_params->parsed()) return cmd_bench_params(args);
            if (bench_latency->parsed()) return cmd_bench_latency(args, bench_checkpoint);
            return cmd_bench_stream(args, stream_windows);
        }
        if (pipeline->parsed()) return cmd_pipeline(args, ablation);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const har::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const har::StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
