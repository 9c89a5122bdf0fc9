#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "har/core/error.hpp"
#include "har/core/graph.hpp"

#ifdef __linux__
#include <sys/utsname.h>
#endif

namespace har {

struct HostDescriptor {
    int logical_cores = 0;
    std::string os;
};

inline HostDescriptor host_descriptor() {
    HostDescriptor h;
    h.logical_cores = static_cast<int>(std::thread::hardware_concurrency());
#ifdef __linux__
    utsname u{};
    if (uname(&u) == 0) h.os = str(u.sysname, " ", u.release, " ", u.machine);
#endif
    if (h.os.empty()) h.os = "unknown";
    return h;
}

/// Resident set size in bytes (Linux, informational; 0 when unavailable).
inline int64_t resident_memory_bytes() {
#ifdef __linux__
    std::ifstream in("/proc/self/status");
    std::string key;
    while (in >> key) {
        if (key == "VmRSS:") {
            int64_t kb = 0;
            in >> kb;
            return kb * 1024;
        }
        std::string rest;
        std::getline(in, rest);
    }
#endif
    return 0;
}

struct ComplexityReport {
    int64_t param_count = 0;
    int64_t param_bytes = 0;        // analytic, 4 bytes per parameter
    int64_t activation_bytes = 0;   // analytic: forward node outputs at batch 1
    int64_t resident_bytes = 0;     // measured, informational
};

/// Exact parameter count plus an analytic memory estimate derived from one
/// batch-1 forward graph. Resident memory is measured and reported for
/// reference only since it depends on the host allocator.
template <typename Model>
ComplexityReport count_params(Model& model, int channels, int window) {
    ComplexityReport r;
    for (const auto* p : model.parameters()) r.param_count += p->value.size();
    r.param_bytes = r.param_count * static_cast<int64_t>(sizeof(float));

    Graph g;
    TensorF x({1, channels, window});
    model.forward(g, g.value(std::move(x)), false);
    for (size_t i = 0; i < g.num_nodes(); ++i)
        r.activation_bytes += g.val(Var{static_cast<int>(i)}).size() *
                              static_cast<int64_t>(sizeof(float));
    r.resident_bytes = resident_memory_bytes();
    return r;
}

struct LatencyReport {
    std::vector<double> durations_ms;  // one entry per measured run
    double mean_ms = 0, p50_ms = 0, p95_ms = 0, max_ms = 0;
    int runs = 0;
    int warmup = 0;
    double deadline_ms = 0;
    int misses = 0;
    std::string model_id;
    std::string config_hash;
    HostDescriptor host;
};

inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    // nearest-rank
    const size_t n = sorted.size();
    size_t rank = static_cast<size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::min(std::max<size_t>(rank, 1), n);
    return sorted[rank - 1];
}

inline void summarize_latency(LatencyReport& r) {
    std::vector<double> sorted = r.durations_ms;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0;
    for (double d : sorted) sum += d;
    r.mean_ms = sum / static_cast<double>(sorted.size());
    r.p50_ms = percentile_sorted(sorted, 0.50);
    r.p95_ms = percentile_sorted(sorted, 0.95);
    r.max_ms = sorted.back();
    r.misses = 0;
    for (double d : r.durations_ms)
        if (d > r.deadline_ms) ++r.misses;
}

/// Warm single-segment inference timing: `warmup` unrecorded forward passes,
/// then `runs` timed ones on the same segment (monotonic clock, single
/// thread). Only the forward pass is inside the timed region.
template <typename Model>
LatencyReport latency_run(Model& model, const TensorF& segment, int runs, int warmup,
                          double deadline_ms, const std::string& model_id = "model",
                          const std::string& config_hash = "") {
    require(runs >= 1, "latency_run: runs must be >= 1, got ", runs);
    require(warmup >= 0, "latency_run: warmup must be >= 0");
    require(segment.ndim() == 3, "latency_run: segment must be [1,C,W], got ",
            shape_str(segment.shape()));

    LatencyReport r;
    r.runs = runs;
    r.warmup = warmup;
    r.deadline_ms = deadline_ms;
    r.model_id = model_id;
    r.config_hash = config_hash;
    r.host = host_descriptor();
    r.durations_ms.reserve(static_cast<size_t>(runs));

    using clock = std::chrono::steady_clock;
    for (int i = 0; i < warmup; ++i) {
        Graph g;
        model.forward(g, g.value(segment), false);
    }
    for (int i = 0; i < runs; ++i) {
        Graph g;
        Var x = g.value(segment);
        const auto t0 = clock::now();
        model.forward(g, x, false);
        const auto t1 = clock::now();
        r.durations_ms.push_back(
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1e6);
    }
    summarize_latency(r);
    return r;
}

struct StreamSegmentRecord {
    int64_t offset = 0;
    double duration_ms = 0;
    bool miss = false;
    int prediction = -1;
};

struct StreamReplayReport {
    std::vector<StreamSegmentRecord> segments;
    double deadline_ms = 0;
    int64_t misses = 0;
    double sustainable_fraction = 1.0;  // fraction of segments meeting the deadline
};

/// Sliding-window streaming replay: segments start at offsets 0, step, 2*step
/// while a full window fits. Each segment is classified once and its forward
/// duration compared against the step-cadence deadline.
template <typename Model>
StreamReplayReport stream_replay(Model& model, const TensorF& stream, int window, int step,
                                 double deadline_ms) {
    require(stream.ndim() == 2, "stream_replay: stream must be [C,L], got ",
            shape_str(stream.shape()));
    require(window >= 1 && step >= 1, "stream_replay: window/step must be >= 1");
    const int C = stream.dim(0);
    const int64_t L = stream.dim(1);
    StreamReplayReport rep;
    rep.deadline_ms = deadline_ms;
    if (L < window) return rep;

    using clock = std::chrono::steady_clock;
    for (int64_t off = 0; off + window <= L; off += step) {
        TensorF seg({1, C, window});
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < window; ++i)
                seg.at(0, c, i) = stream.at(c, static_cast<int>(off) + i);
        Graph g;
        Var x = g.value(std::move(seg));
        const auto t0 = clock::now();
        Var logits = model.forward(g, x, false);
        const auto t1 = clock::now();

        StreamSegmentRecord rec;
        rec.offset = off;
        rec.duration_ms =
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1e6;
        rec.miss = rec.duration_ms > deadline_ms;
        const TensorF& lv = g.val(logits);
        int best = 0;
        for (int k = 1; k < lv.dim(1); ++k)
            if (lv.at(0, k) > lv.at(0, best)) best = k;
        rec.prediction = best;
        if (rec.miss) ++rep.misses;
        rep.segments.push_back(rec);
    }
    if (!rep.segments.empty())
        rep.sustainable_fraction = 1.0 - static_cast<double>(rep.misses) /
                                             static_cast<double>(rep.segments.size());
    return rep;
}

// ---- report writers --------------------------------------------------------

inline void write_latency_csv(const LatencyReport& r, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write ", path);
    out << "run,ms\n";
    out.precision(9);
    for (size_t i = 0; i < r.durations_ms.size(); ++i) out << i << "," << r.durations_ms[i] << "\n";
}

inline nlohmann::json latency_to_json(const LatencyReport& r) {
    nlohmann::json j;
    j["model_id"] = r.model_id;
    j["config_hash"] = r.config_hash;
    j["runs"] = r.runs;
    j["warmup"] = r.warmup;
    j["mean_ms"] = r.mean_ms;
    j["p50_ms"] = r.p50_ms;
    j["p95_ms"] = r.p95_ms;
    j["max_ms"] = r.max_ms;
    j["deadline_ms"] = r.deadline_ms;
    j["misses"] = r.misses;
    j["host"] = {{"logical_cores", r.host.logical_cores}, {"os", r.host.os}};
    return j;
}

/// gnuplot-compatible histogram: `bin_center count` rows, 20 equal bins.
inline void write_latency_histogram(const LatencyReport& r, const std::string& path,
                                    int bins = 20) {
    std::ofstream out(path);
    require(out.good(), "cannot write ", path);
    double lo = std::numeric_limits<double>::max(), hi = 0;
    for (double d : r.durations_ms) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    if (hi <= lo) hi = lo + 1e-6;
    const double width = (hi - lo) / bins;
    std::vector<int> counts(static_cast<size_t>(bins), 0);
    for (double d : r.durations_ms) {
        int b = static_cast<int>((d - lo) / width);
        b = std::min(std::max(b, 0), bins - 1);
        ++counts[static_cast<size_t>(b)];
    }
    out << "# latency histogram for " << r.model_id << " (ms)\n";
    out.precision(9);
    for (int b = 0; b < bins; ++b)
        out << lo + (b + 0.5) * width << " " << counts[static_cast<size_t>(b)] << "\n";
}

}  // namespace har
