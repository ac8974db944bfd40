#pragma once

#include "stfa/texture.hpp"

namespace stfa {

struct SpatialAttentionConfig {
    int maps = 4;
    int in_channels = 1;
};

struct SpatialAttentionParams {
    TensorPtr kernel;  // [M, C, 1, 1]
    TensorPtr bias;    // [M]

    NamedParams named(const std::string& prefix) const;
};

SpatialAttentionParams init_spatial_attention(const SpatialAttentionConfig& cfg, Rng& rng);

// relu(1x1 conv), one non-negative H x W map per output channel.
TensorPtr spatial_attention_maps(Tape& tape, TensorPtr features, const SpatialAttentionParams& params);

// Multiplies every channel of `shallow` by the mean of the maps. Summing the
// maps before a single division keeps uniform unit maps an exact identity.
TensorPtr apply_spatial_attention(Tape& tape, TensorPtr shallow, TensorPtr maps);

}  // namespace stfa
