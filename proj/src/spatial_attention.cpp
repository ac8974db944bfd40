#include "stfa/spatial_attention.hpp"

#include <cmath>
#include <stdexcept>

#include "stfa/rng.hpp"

namespace stfa {

NamedParams SpatialAttentionParams::named(const std::string& prefix) const {
    return {{prefix + "/kernel", kernel}, {prefix + "/bias", bias}};
}

SpatialAttentionParams init_spatial_attention(const SpatialAttentionConfig& cfg, Rng& rng) {
    if (cfg.maps < 1) throw std::invalid_argument("spatial attention needs at least one map, got " + std::to_string(cfg.maps));
    if (cfg.in_channels < 1) throw std::invalid_argument("spatial attention needs in_channels >= 1");
    const double limit = std::sqrt(3.0 / cfg.in_channels);
    SpatialAttentionParams p;
    p.kernel = rand_uniform({cfg.maps, cfg.in_channels, 1, 1}, rng, -limit, limit);
    p.bias = zeros({cfg.maps});
    return p;
}

TensorPtr spatial_attention_maps(Tape& tape, TensorPtr features, const SpatialAttentionParams& params) {
    return tape.relu(tape.add_channel_bias(tape.conv2d(features, params.kernel, 1, 0), params.bias));
}

TensorPtr apply_spatial_attention(Tape& tape, TensorPtr shallow, TensorPtr maps) {
    if (maps->rank() != 3)
        throw std::invalid_argument("attention maps must be [M,H,W], got " + shape_str(maps->shape));
    if (shallow->rank() != 3 || shallow->dim(1) != maps->dim(1) || shallow->dim(2) != maps->dim(2))
        throw std::invalid_argument("map extents " + shape_str(maps->shape) + " do not match features " +
                                    shape_str(shallow->shape));
    const int m = maps->dim(0);
    const int h = maps->dim(1), w = maps->dim(2);
    auto acc = tape.reshape(tape.slice0(maps, 0, 1), {h, w});
    for (int i = 1; i < m; ++i) acc = tape.add(acc, tape.reshape(tape.slice0(maps, i, i + 1), {h, w}));
    auto mean_map = tape.div_scalar(acc, static_cast<double>(m));
    return tape.channel_scale(shallow, mean_map);
}

}  // namespace stfa
