#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "har/core/error.hpp"
#include "har/data/dataset.hpp"

namespace har {

inline constexpr int kCacheFormatVersion = 1;

/// Windowed-dataset cache: `dataset.json` (counts, shapes, splits,
/// normalization, per-window metadata incl. the synthetic provenance flag)
/// plus `windows.bin`, the [N,C,W] window values as little-endian f32.
inline void save_dataset_cache(const std::filesystem::path& dir, const WindowedDataset& ds) {
    std::filesystem::create_directories(dir);
    nlohmann::json m;
    m["format_version"] = kCacheFormatVersion;
    m["num_windows"] = ds.windows.size();
    m["channels"] = ds.channels();
    m["window"] = ds.width();
    m["num_classes"] = ds.num_classes;
    m["class_counts"] = ds.class_counts;
    m["class_names"] = ds.class_names;
    m["splits"] = {{"train", ds.splits.train}, {"val", ds.splits.val}, {"test", ds.splits.test}};
    m["normalization"] = {{"mean", ds.normalization.mean}, {"std", ds.normalization.stddev}};
    nlohmann::json meta = nlohmann::json::array();
    for (const auto& w : ds.windows)
        meta.push_back({{"label", w.label},
                        {"subject", w.subject},
                        {"t_start", w.t_start},
                        {"synthetic", w.synthetic}});
    m["windows"] = meta;

    std::ofstream mf(dir / "dataset.json");
    require(mf.good(), "cannot write ", (dir / "dataset.json").string());
    mf << m.dump(2) << "\n";

    std::ofstream bf(dir / "windows.bin", std::ios::binary);
    require(bf.good(), "cannot write ", (dir / "windows.bin").string());
    for (const auto& w : ds.windows)
        bf.write(reinterpret_cast<const char*>(w.values.data()),
                 w.values.size() * static_cast<int64_t>(sizeof(float)));
    require(bf.good(), "short write to ", (dir / "windows.bin").string());
}

inline WindowedDataset load_dataset_cache(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "dataset.json");
    require(mf.good(), "cannot read ", (dir / "dataset.json").string());
    nlohmann::json m = nlohmann::json::parse(mf);
    require(m.at("format_version").get<int>() == kCacheFormatVersion,
            "unsupported dataset cache version ", m.at("format_version").get<int>());

    WindowedDataset ds;
    const int C = m.at("channels").get<int>();
    const int W = m.at("window").get<int>();
    ds.num_classes = m.at("num_classes").get<int>();
    ds.class_counts = m.at("class_counts").get<std::vector<int64_t>>();
    ds.class_names = m.at("class_names").get<std::vector<std::string>>();
    ds.splits.train = m.at("splits").at("train").get<std::vector<int>>();
    ds.splits.val = m.at("splits").at("val").get<std::vector<int>>();
    ds.splits.test = m.at("splits").at("test").get<std::vector<int>>();
    ds.normalization.mean = m.at("normalization").at("mean").get<std::vector<float>>();
    ds.normalization.stddev = m.at("normalization").at("std").get<std::vector<float>>();

    const auto& meta = m.at("windows");
    std::ifstream bf(dir / "windows.bin", std::ios::binary);
    require(bf.good(), "cannot read ", (dir / "windows.bin").string());
    for (const auto& e : meta) {
        SensorWindow w;
        w.values = TensorF({C, W});
        bf.read(reinterpret_cast<char*>(w.values.data()),
                w.values.size() * static_cast<int64_t>(sizeof(float)));
        require(bf.good(), "short read in ", (dir / "windows.bin").string());
        w.label = e.at("label").get<int>();
        w.subject = e.at("subject").get<int>();
        w.t_start = e.at("t_start").get<int64_t>();
        w.synthetic = e.at("synthetic").get<bool>();
        ds.windows.push_back(std::move(w));
    }
    require(ds.windows.size() == m.at("num_windows").get<size_t>(),
            "dataset cache window count mismatch");
    return ds;
}

}  // namespace har
