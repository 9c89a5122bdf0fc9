#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "har/core/checkpoint.hpp"
#include "har/core/error.hpp"
#include "har/data/dataset.hpp"
#include "har/msti/config.hpp"
#include "har/train/trainer.hpp"

namespace har {

/// Configuration errors carry the offending field path (e.g. "train.lr") and
/// map to exit code 2 in the CLI.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& msg)
        : Error(path + ": " + msg), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

namespace detail {

/// Strict reader over one JSON object: typed getters record known keys, and
/// finish() rejects anything unrecognized, reporting its full path.
class ConfigReader {
public:
    ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    template <typename T>
    void get(const char* key, T& target) {
        known_.push_back(key);
        if (!j_.contains(key)) return;
        try {
            target = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(sub(key), "has the wrong type");
        }
    }

    bool has_object(const char* key) {
        known_.push_back(key);
        if (!j_.contains(key)) return false;
        if (!j_.at(key).is_object()) throw ConfigError(sub(key), "expected an object");
        return true;
    }

    ConfigReader object(const char* key) const { return {j_.at(key), sub(key)}; }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            bool ok = false;
            for (const char* k : known_)
                if (key == k) ok = true;
            if (!ok) throw ConfigError(sub(key.c_str()), "unknown field");
        }
    }

    std::string sub(const char* key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::vector<const char*> known_;
};

}  // namespace detail

struct DataConfig {
    std::string kind = "synthetic";  // synthetic | wisdm | generic_csv | cache
    std::string path;
    int window = 90;
    int step = 45;
    double train_frac = 0.70;
    double val_frac = 0.15;
    bool subject_wise = false;
    // synthetic-data knobs
    int classes = 3;
    int channels = 3;
    std::vector<int> per_class;  // empty = 100 per class
    double noise_std = 0.1;
    double amplitude = 1.0;
    double offset_base = 1.0;
    double offset_step = 1.0;
};

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    double lr = 1e-3;
    std::string loss_mode = "adaptive";  // ce_only | fixed | adaptive
    std::vector<double> weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    double tau = 0.5;
    double alpha_t = 0.25;
    double gamma = 2.0;
    double eps_smooth = 0.1;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8, weight_decay = 1e-4;
    bool adapt_on_val = false;
};

struct SynthRunConfig {
    bool enabled = false;
    int diffusion_steps = 50;
    double beta_start = 0.999;
    double beta_end = 0.02;
    int pretrain_steps = 300;
    int pretrain_batch = 16;
    double pretrain_lr = 2e-3;
    int hidden = 16;
    int per_class = 0;  // generated windows per class; 0 balances to the largest class
    int refine_steps = 1;
    bool mix_real = false;  // include real windows in the synthetic phase
};

struct BenchRunConfig {
    int runs = 100;
    int warmup = 10;
    double deadline_ms = 200.0;
    double sample_rate_hz = 20.0;
    int stream_windows = 10;  // replay stream length in windows
};

struct ModelJsonConfig {
    int cardinality = 2;
    int radix = 2;
    int stem_taps = 5;
    int stem_channels = 32;
    std::vector<std::vector<int>> stages = {{1, 64}, {1, 128}, {1, 256}};
    int num_classes = 6;
    std::string variant = "full";
    int fc_reduction = 4;
    int fc_min_hidden = 8;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

struct RunConfig {
    uint64_t seed = 7;
    std::string out_dir;  // empty -> derived under the output root
    DataConfig data;
    ModelJsonConfig model;
    TrainConfig train;
    SynthRunConfig synth;
    BenchRunConfig bench;

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    std::string hash() const { return hash_hex(to_json().dump()); }
    void validate() const;

    /// MstiConfig for the given input geometry.
    MstiConfig msti_config(int channels, int window) const {
        MstiConfig c;
        c.cardinality = model.cardinality;
        c.radix = model.radix;
        c.stem_taps = model.stem_taps;
        c.stem_channels = model.stem_channels;
        c.stages.clear();
        for (const auto& s : model.stages) c.stages.push_back({s[0], s[1]});
        c.channels = channels;
        c.window = window;
        c.num_classes = model.num_classes;
        c.variant = variant_from_name(model.variant);
        c.fc_reduction = model.fc_reduction;
        c.fc_min_hidden = model.fc_min_hidden;
        c.bn_momentum = model.bn_momentum;
        c.bn_eps = model.bn_eps;
        return c;
    }

    FitSchedule fit_schedule(uint64_t fit_seed) const {
        FitSchedule s;
        s.epochs = train.epochs;
        s.batch_size = train.batch_size;
        s.lr = train.lr;
        s.beta1 = train.beta1;
        s.beta2 = train.beta2;
        s.adam_eps = train.adam_eps;
        s.weight_decay = train.weight_decay;
        if (train.loss_mode == "ce_only") s.mode = LossMode::kCeOnly;
        else if (train.loss_mode == "fixed") s.mode = LossMode::kFixed;
        else s.mode = LossMode::kAdaptive;
        s.weights = LossWeights::fixed(train.weights[0], train.weights[1], train.weights[2],
                                       train.tau);
        s.focal.alpha_t = train.alpha_t;
        s.focal.gamma = train.gamma;
        s.focal.eps_smooth = train.eps_smooth;
        s.adapt_on_val = train.adapt_on_val;
        s.seed = fit_seed;
        return s;
    }

    SyntheticSpec synthetic_spec() const {
        SyntheticSpec sp;
        sp.classes = data.classes;
        sp.channels = data.channels;
        sp.window = data.window;
        sp.per_class = data.per_class;
        sp.noise_std = data.noise_std;
        sp.amplitude = data.amplitude;
        sp.offset_base = data.offset_base;
        sp.offset_step = data.offset_step;
        sp.seed = Rng::derive(seed, 0xda7a5e7);
        sp.train_frac = data.train_frac;
        sp.val_frac = data.val_frac;
        return sp;
    }
};

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    detail::ConfigReader root(j, "");
    root.get("seed", c.seed);
    root.get("out_dir", c.out_dir);

    if (root.has_object("data")) {
        auto r = root.object("data");
        r.get("kind", c.data.kind);
        r.get("path", c.data.path);
        r.get("window", c.data.window);
        r.get("step", c.data.step);
        r.get("train_frac", c.data.train_frac);
        r.get("val_frac", c.data.val_frac);
        r.get("subject_wise", c.data.subject_wise);
        r.get("classes", c.data.classes);
        r.get("channels", c.data.channels);
        r.get("per_class", c.data.per_class);
        r.get("noise_std", c.data.noise_std);
        r.get("amplitude", c.data.amplitude);
        r.get("offset_base", c.data.offset_base);
        r.get("offset_step", c.data.offset_step);
        r.finish();
    }
    if (root.has_object("model")) {
        auto r = root.object("model");
        r.get("cardinality", c.model.cardinality);
        r.get("radix", c.model.radix);
        r.get("stem_taps", c.model.stem_taps);
        r.get("stem_channels", c.model.stem_channels);
        r.get("stages", c.model.stages);
        r.get("num_classes", c.model.num_classes);
        r.get("variant", c.model.variant);
        r.get("fc_reduction", c.model.fc_reduction);
        r.get("fc_min_hidden", c.model.fc_min_hidden);
        r.get("bn_momentum", c.model.bn_momentum);
        r.get("bn_eps", c.model.bn_eps);
        r.finish();
    }
    if (root.has_object("train")) {
        auto r = root.object("train");
        r.get("epochs", c.train.epochs);
        r.get("batch_size", c.train.batch_size);
        r.get("lr", c.train.lr);
        r.get("loss_mode", c.train.loss_mode);
        r.get("weights", c.train.weights);
        r.get("tau", c.train.tau);
        r.get("alpha_t", c.train.alpha_t);
        r.get("gamma", c.train.gamma);
        r.get("eps_smooth", c.train.eps_smooth);
        r.get("beta1", c.train.beta1);
        r.get("beta2", c.train.beta2);
        r.get("adam_eps", c.train.adam_eps);
        r.get("weight_decay", c.train.weight_decay);
        r.get("adapt_on_val", c.train.adapt_on_val);
        r.finish();
    }
    if (root.has_object("synth")) {
        auto r = root.object("synth");
        r.get("enabled", c.synth.enabled);
        r.get("diffusion_steps", c.synth.diffusion_steps);
        r.get("beta_start", c.synth.beta_start);
        r.get("beta_end", c.synth.beta_end);
        r.get("pretrain_steps", c.synth.pretrain_steps);
        r.get("pretrain_batch", c.synth.pretrain_batch);
        r.get("pretrain_lr", c.synth.pretrain_lr);
        r.get("hidden", c.synth.hidden);
        r.get("per_class", c.synth.per_class);
        r.get("refine_steps", c.synth.refine_steps);
        r.get("mix_real", c.synth.mix_real);
        r.finish();
    }
    if (root.has_object("bench")) {
        auto r = root.object("bench");
        r.get("runs", c.bench.runs);
        r.get("warmup", c.bench.warmup);
        r.get("deadline_ms", c.bench.deadline_ms);
        r.get("sample_rate_hz", c.bench.sample_rate_hz);
        r.get("stream_windows", c.bench.stream_windows);
        r.finish();
    }
    root.finish();
    c.validate();
    return c;
}

inline nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["data"] = {{"kind", data.kind},
                 {"path", data.path},
                 {"window", data.window},
                 {"step", data.step},
                 {"train_frac", data.train_frac},
                 {"val_frac", data.val_frac},
                 {"subject_wise", data.subject_wise},
                 {"classes", data.classes},
                 {"channels", data.channels},
                 {"per_class", data.per_class},
                 {"noise_std", data.noise_std},
                 {"amplitude", data.amplitude},
                 {"offset_base", data.offset_base},
                 {"offset_step", data.offset_step}};
    j["model"] = {{"cardinality", model.cardinality},
                  {"radix", model.radix},
                  {"stem_taps", model.stem_taps},
                  {"stem_channels", model.stem_channels},
                  {"stages", model.stages},
                  {"num_classes", model.num_classes},
                  {"variant", model.variant},
                  {"fc_reduction", model.fc_reduction},
                  {"fc_min_hidden", model.fc_min_hidden},
                  {"bn_momentum", model.bn_momentum},
                  {"bn_eps", model.bn_eps}};
    j["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"lr", train.lr},
                  {"loss_mode", train.loss_mode},
                  {"weights", train.weights},
                  {"tau", train.tau},
                  {"alpha_t", train.alpha_t},
                  {"gamma", train.gamma},
                  {"eps_smooth", train.eps_smooth},
                  {"beta1", train.beta1},
                  {"beta2", train.beta2},
                  {"adam_eps", train.adam_eps},
                  {"weight_decay", train.weight_decay},
                  {"adapt_on_val", train.adapt_on_val}};
    j["synth"] = {{"enabled", synth.enabled},
                  {"diffusion_steps", synth.diffusion_steps},
                  {"beta_start", synth.beta_start},
                  {"beta_end", synth.beta_end},
                  {"pretrain_steps", synth.pretrain_steps},
                  {"pretrain_batch", synth.pretrain_batch},
                  {"pretrain_lr", synth.pretrain_lr},
                  {"hidden", synth.hidden},
                  {"per_class", synth.per_class},
                  {"refine_steps", synth.refine_steps},
                  {"mix_real", synth.mix_real}};
    j["bench"] = {{"runs", bench.runs},
                  {"warmup", bench.warmup},
                  {"deadline_ms", bench.deadline_ms},
                  {"sample_rate_hz", bench.sample_rate_hz},
                  {"stream_windows", bench.stream_windows}};
    return j;
}

inline void RunConfig::validate() const {
    auto check = [](bool ok, const char* path, const std::string& msg) {
        if (!ok) throw ConfigError(path, msg);
    };
    check(data.kind == "synthetic" || data.kind == "wisdm" || data.kind == "generic_csv" ||
              data.kind == "cache",
          "data.kind", "must be synthetic|wisdm|generic_csv|cache, got '" + data.kind + "'");
    if (data.kind != "synthetic")
        check(!data.path.empty(), "data.path", "required for kind '" + data.kind + "'");
    check(data.window >= 1, "data.window", "must be >= 1");
    check(data.step >= 1 && data.step <= data.window, "data.step", "must be in [1, window]");
    check(data.train_frac > 0 && data.val_frac >= 0 &&
              data.train_frac + data.val_frac < 1.0 + 1e-12,
          "data.train_frac", "train/val fractions must leave room for a test split");
    check(data.classes >= 1, "data.classes", "must be >= 1");
    check(data.channels >= 1, "data.channels", "must be >= 1");
    check(data.noise_std >= 0, "data.noise_std", "must be >= 0");
    if (!data.per_class.empty())
        check(static_cast<int>(data.per_class.size()) == data.classes, "data.per_class",
              "needs one count per class");

    check(model.cardinality >= 1, "model.cardinality", "must be >= 1");
    check(model.radix >= 1, "model.radix", "must be >= 1");
    check(model.stem_taps >= 1 && model.stem_taps % 2 == 1, "model.stem_taps", "must be odd");
    const int groups = model.cardinality * model.radix;
    check(model.stem_channels >= 1 && model.stem_channels % groups == 0, "model.stem_channels",
          "must be divisible by cardinality*radix");
    check(!model.stages.empty(), "model.stages", "at least one stage required");
    for (const auto& s : model.stages) {
        check(s.size() == 2, "model.stages", "each stage is [blocks, width]");
        check(s[0] >= 1, "model.stages", "stage block count must be >= 1");
        check(s[1] >= 1 && s[1] % groups == 0, "model.stages",
              "stage width must be divisible by cardinality*radix");
    }
    check(model.num_classes >= 2, "model.num_classes", "must be >= 2");
    check(model.variant == "base" || model.variant == "spatial" || model.variant == "temporal" ||
              model.variant == "full",
          "model.variant", "must be base|spatial|temporal|full");

    check(train.epochs >= 1, "train.epochs", "must be >= 1");
    check(train.batch_size >= 1, "train.batch_size", "must be >= 1");
    check(train.lr > 0, "train.lr", "must be > 0");
    check(train.loss_mode == "ce_only" || train.loss_mode == "fixed" ||
              train.loss_mode == "adaptive",
          "train.loss_mode", "must be ce_only|fixed|adaptive");
    check(train.weights.size() == 3, "train.weights", "needs exactly [w0, w1, w2]");
    for (double w : train.weights)
        check(w >= 0, "train.weights", "weights must be nonnegative");
    check(train.tau >= 0 && train.tau <= 1, "train.tau", "must be in [0,1]");
    check(train.alpha_t >= 0 && train.alpha_t <= 1, "train.alpha_t", "must be in [0,1]");
    check(train.gamma >= 0, "train.gamma", "must be >= 0");
    check(train.eps_smooth >= 0 && train.eps_smooth <= 1, "train.eps_smooth",
          "must be in [0,1]");

    check(synth.diffusion_steps >= 1, "synth.diffusion_steps", "must be >= 1");
    check(synth.beta_start > 0 && synth.beta_start <= 1, "synth.beta_start", "must be in (0,1]");
    check(synth.beta_end > 0 && synth.beta_end <= 1, "synth.beta_end", "must be in (0,1]");
    check(synth.beta_start != synth.beta_end, "synth.beta_end",
          "schedule must be strictly monotone");
    check(synth.pretrain_steps >= 1, "synth.pretrain_steps", "must be >= 1");
    check(synth.pretrain_batch >= 1, "synth.pretrain_batch", "must be >= 1");
    check(synth.pretrain_lr > 0, "synth.pretrain_lr", "must be > 0");
    check(synth.hidden >= 1, "synth.hidden", "must be >= 1");
    check(synth.per_class >= 0, "synth.per_class", "must be >= 0");
    check(synth.refine_steps >= 1, "synth.refine_steps", "must be >= 1");

    check(bench.runs >= 1, "bench.runs", "must be >= 1");
    check(bench.warmup >= 0, "bench.warmup", "must be >= 0");
    check(bench.deadline_ms > 0, "bench.deadline_ms", "must be > 0");
    check(bench.sample_rate_hz > 0, "bench.sample_rate_hz", "must be > 0");
    check(bench.stream_windows >= 1, "bench.stream_windows", "must be >= 1");
}

/// Named presets carrying the published per-dataset defaults (window, batch
/// size, learning rate, epochs). `<name>-synthetic` variants keep the
/// hyperparameters but run on the synthetic stand-in data.
inline RunConfig preset_config(const std::string& name) {
    RunConfig c;
    auto table = [&c](int window, int batch, double lr, int epochs, int classes, int channels,
                      double sample_rate_hz) {
        c.data.window = window;
        c.data.step = std::max(1, window / 2);
        c.train.batch_size = batch;
        c.train.lr = lr;
        c.train.epochs = epochs;
        c.model.num_classes = classes;
        c.data.classes = classes;
        c.data.channels = channels;
        c.bench.sample_rate_hz = sample_rate_hz;
        c.bench.deadline_ms = 1000.0 * 0.05 * window / sample_rate_hz;
    };
    if (name == "wisdm" || name == "wisdm-synthetic") {
        table(90, 512, 0.005, 50, 6, 3, 20.0);
        c.bench.deadline_ms = 200.0;  // published 4 s segment / 200 ms step protocol
        c.data.kind = name == "wisdm" ? "wisdm" : "synthetic";
    } else if (name == "pamap2" || name == "pamap2-synthetic") {
        table(171, 256, 0.001, 30, 12, 3, 100.0);
        c.data.kind = name == "pamap2" ? "generic_csv" : "synthetic";
    } else if (name == "opportunity" || name == "opportunity-synthetic") {
        table(113, 256, 0.001, 40, 18, 72, 30.0);
        c.data.kind = name == "opportunity" ? "generic_csv" : "synthetic";
    } else {
        throw ConfigError("preset", "unknown preset '" + name +
                                        "' (expected wisdm|pamap2|opportunity, optionally "
                                        "with -synthetic)");
    }
    return c;
}

}  // namespace har
