#pragma once

#include <string>
#include <vector>

#include "har/core/error.hpp"

namespace har {

/// Attention ablation axes: the multi-branch cardinality/radix structure is
/// always present; spatial and channel-statistics (temporal) attention can be
/// enabled independently.
enum class AttentionVariant { kBase, kSpatial, kTemporal, kFull };

inline const char* variant_name(AttentionVariant v) {
    switch (v) {
        case AttentionVariant::kBase: return "base";
        case AttentionVariant::kSpatial: return "spatial";
        case AttentionVariant::kTemporal: return "temporal";
        default: return "full";
    }
}

inline AttentionVariant variant_from_name(const std::string& s) {
    if (s == "base") return AttentionVariant::kBase;
    if (s == "spatial") return AttentionVariant::kSpatial;
    if (s == "temporal") return AttentionVariant::kTemporal;
    if (s == "full") return AttentionVariant::kFull;
    fail("unknown attention variant '", s, "' (expected base|spatial|temporal|full)");
}

struct StageSpec {
    int blocks = 1;
    int width = 64;  // block output channels, must be divisible by K*R
};

struct MstiConfig {
    int cardinality = 2;  // K: independent cardinal groups
    int radix = 2;        // R: splits per cardinal group, fused by soft attention
    int stem_taps = 5;
    int stem_channels = 32;
    std::vector<StageSpec> stages = {{1, 64}, {1, 128}, {1, 256}};
    int channels = 3;   // input channels
    int window = 90;    // input samples per window
    int num_classes = 6;
    AttentionVariant variant = AttentionVariant::kFull;
    int fc_reduction = 4;   // attention-MLP hidden = max(fc_min_hidden, (width/K)/fc_reduction)
    int fc_min_hidden = 8;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    int groups() const { return cardinality * radix; }

    void validate() const {
        require(cardinality >= 1 && radix >= 1, "msti config: K and R must be >= 1 (K=",
                cardinality, ", R=", radix, ")");
        require(channels >= 1 && window >= 1 && num_classes >= 2,
                "msti config: channels/window/num_classes out of range");
        require(stem_taps >= 1 && stem_taps % 2 == 1, "msti config: stem taps must be odd, got ",
                stem_taps);
        require(stem_channels >= 1 && stem_channels % groups() == 0,
                "msti config: stem channels ", stem_channels, " not divisible by K*R = ",
                groups());
        require(!stages.empty(), "msti config: at least one stage required");
        for (size_t s = 0; s < stages.size(); ++s) {
            require(stages[s].blocks >= 1, "msti config: stage ", s, " has no blocks");
            require(stages[s].width >= 1 && stages[s].width % groups() == 0,
                    "msti config: stage ", s, " width ", stages[s].width,
                    " not divisible by K*R = ", groups());
        }
        require(fc_reduction >= 1 && fc_min_hidden >= 1, "msti config: FC reduction invalid");
    }
};

}  // namespace har
