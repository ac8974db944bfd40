#pragma once

#include "stfa/texture.hpp"

namespace stfa {

struct TemporalAttentionConfig {
    int residual_channels = 2;  // |frame difference| + flow magnitude
    int conv_channels = 8;
    int embed_dim = 32;
    bool uniform_map = false;  // ablation: constant 1/9 map, template unused
};

struct TemporalAttentionParams {
    TensorPtr conv_kernel;  // [C_f, residual_channels, 3, 3]
    TensorPtr conv_bias;    // [C_f]
    TensorPtr proj_weight;  // [patch_dim, C]
    TensorPtr proj_bias;    // [C]
    TensorPtr pos;          // [9, C]
    TensorPtr cls;          // [1, C]
    TensorPtr wq, wk, wv;   // [C, C]
    TensorPtr mlp_w1;       // [C, 2C]
    TensorPtr mlp_b1;       // [2C]
    TensorPtr mlp_w2;       // [2C, C]
    TensorPtr mlp_b2;       // [C]
    TensorPtr fake_template;  // [C]

    NamedParams named(const std::string& prefix) const;
};

// Patch grid side for given feature extents: 6 when both extents allow it,
// else 3 (extents below 3 are rejected). Patches are (grid/3)^2 cells.
int patch_grid_for(int h, int w);

TemporalAttentionParams init_temporal_attention(const TemporalAttentionConfig& cfg, int h, int w, Rng& rng);

// Rectangular average pooling down to grid x grid, cropping any remainder.
TensorPtr pool_to_grid(Tape& tape, TensorPtr x, int grid);

// Row-major 3x3 tiling of [C,G,G] into [9, C*(G/3)^2]; bit-exact inverse.
TensorPtr patchify(Tape& tape, TensorPtr x);
TensorPtr unpatchify(Tape& tape, TensorPtr seq, int channels, int grid);

// Shared linear projection plus per-position embedding: [9,D] -> [9,C].
TensorPtr embed_patches(Tape& tape, TensorPtr seq, const TemporalAttentionParams& p);

// Prepends the class token, applies one pre-norm-free encoder layer:
// single-head softmax(QK^T/sqrt(C))V with residual, then 2-layer MLP with
// residual. attn, when given, receives the [10,10] attention matrix.
TensorPtr encode(Tape& tape, TensorPtr x, const TemporalAttentionParams& p, TensorPtr* attn = nullptr);

// softmax over the 9 patch-row dot products with the template, as a 3x3 map.
TensorPtr template_attention(Tape& tape, TensorPtr latent, TensorPtr fake_template);

// Nearest-upsamples the 3x3 map to the feature extents and scales channels.
TensorPtr apply_temporal_attention(Tape& tape, TensorPtr deep, TensorPtr map3x3);

struct TemporalForwardOut {
    TensorPtr class_latent;  // [C]
    TensorPtr map;           // [3,3]
    TensorPtr guided_pool;   // [C_f]
};

TemporalForwardOut temporal_forward(Tape& tape, TensorPtr residual, const TemporalAttentionConfig& cfg,
                                    const TemporalAttentionParams& p);

}  // namespace stfa
