#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "har/core/error.hpp"
#include "har/core/tensor.hpp"

namespace har {

/// Tensors a checkpoint covers: trainable parameters plus persistent buffers
/// (batch-norm running statistics), in a deterministic model-defined order.
using NamedTensors = std::vector<std::pair<std::string, TensorF*>>;

inline constexpr int kCheckpointFormatVersion = 1;

/// FNV-1a 64-bit, used to fingerprint configs inside checkpoint manifests.
inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hash_hex(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

/// Writes manifest.json (name, shape, byte offset per tensor) and weights.bin
/// (little-endian 32-bit floats, concatenated in manifest order) into `dir`.
/// Round-trips are bit-exact.
inline void save_checkpoint(const std::filesystem::path& dir, const NamedTensors& tensors,
                            const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format_version"] = kCheckpointFormatVersion;
    manifest["dtype"] = "f32le";
    manifest["config_hash"] = config_hash;
    nlohmann::json entries = nlohmann::json::array();
    int64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = t->shape();
        e["offset_bytes"] = offset;
        entries.push_back(e);
        offset += t->size() * static_cast<int64_t>(sizeof(float));
    }
    manifest["tensors"] = entries;
    manifest["total_bytes"] = offset;

    std::ofstream mf(dir / "manifest.json");
    require(mf.good(), "cannot write ", (dir / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
    mf.close();

    std::ofstream bf(dir / "weights.bin", std::ios::binary);
    require(bf.good(), "cannot write ", (dir / "weights.bin").string());
    for (const auto& [name, t] : tensors)
        bf.write(reinterpret_cast<const char*>(t->data()),
                 t->size() * static_cast<int64_t>(sizeof(float)));
    require(bf.good(), "short write to ", (dir / "weights.bin").string());
}

/// Loads a checkpoint saved by save_checkpoint into the given tensors,
/// verifying names, shapes, and offsets. Returns the stored config hash.
inline std::string load_checkpoint(const std::filesystem::path& dir, const NamedTensors& tensors) {
    std::ifstream mf(dir / "manifest.json");
    require(mf.good(), "cannot read ", (dir / "manifest.json").string());
    nlohmann::json manifest = nlohmann::json::parse(mf);
    require(manifest.at("format_version").get<int>() == kCheckpointFormatVersion,
            "unsupported checkpoint format version ", manifest.at("format_version").get<int>());
    require(manifest.at("dtype").get<std::string>() == "f32le",
            "unsupported checkpoint dtype ", manifest.at("dtype").get<std::string>());
    const auto& entries = manifest.at("tensors");
    require(entries.size() == tensors.size(), "checkpoint holds ", entries.size(),
            " tensors, model expects ", tensors.size());

    std::ifstream bf(dir / "weights.bin", std::ios::binary);
    require(bf.good(), "cannot read ", (dir / "weights.bin").string());
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& e = entries[i];
        const auto& [name, t] = tensors[i];
        require(e.at("name").get<std::string>() == name, "checkpoint tensor ", i, " is '",
                e.at("name").get<std::string>(), "', model expects '", name, "'");
        const Shape shape = e.at("shape").get<Shape>();
        require(shape == t->shape(), "checkpoint tensor ", name, " has shape ",
                shape_str(shape), ", model expects ", shape_str(t->shape()));
        bf.seekg(e.at("offset_bytes").get<int64_t>());
        bf.read(reinterpret_cast<char*>(t->data()),
                t->size() * static_cast<int64_t>(sizeof(float)));
        require(bf.good(), "short read in ", (dir / "weights.bin").string(), " at tensor ", name);
    }
    return manifest.at("config_hash").get<std::string>();
}

}  // namespace har
