#include "stfa/texture.hpp"

#include <cmath>
#include <stdexcept>

#include "stfa/rng.hpp"

namespace stfa {

NamedParams DenseBlockParams::named(const std::string& prefix) const {
    NamedParams out;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        out.emplace_back(prefix + "/layer" + std::to_string(i) + "/kernel", kernels[i]);
        out.emplace_back(prefix + "/layer" + std::to_string(i) + "/bias", biases[i]);
    }
    return out;
}

DenseBlockParams init_dense_block(const DenseBlockConfig& cfg, Rng& rng) {
    if (cfg.layers < 0 || cfg.growth < 1 || cfg.in_channels < 1)
        throw std::invalid_argument("dense block config must have layers >= 0, growth >= 1, in_channels >= 1");
    DenseBlockParams p;
    for (int i = 0; i < cfg.layers; ++i) {
        const int cin = cfg.in_channels + i * cfg.growth;
        const double limit = std::sqrt(3.0 / (cin * 9.0));
        p.kernels.push_back(rand_uniform({cfg.growth, cin, 3, 3}, rng, -limit, limit));
        p.biases.push_back(zeros({cfg.growth}));
    }
    return p;
}

TensorPtr dense_block_forward(Tape& tape, TensorPtr x, const DenseBlockConfig& cfg, const DenseBlockParams& params) {
    if (static_cast<int>(params.kernels.size()) != cfg.layers || params.biases.size() != params.kernels.size())
        throw std::invalid_argument("dense block params hold " + std::to_string(params.kernels.size()) +
                                    " layers, config says " + std::to_string(cfg.layers));
    if (x->rank() != 3 || x->dim(0) != cfg.in_channels)
        throw std::invalid_argument("dense block expects [" + std::to_string(cfg.in_channels) + ",H,W], got " +
                                    shape_str(x->shape));
    auto cat = x;
    for (int i = 0; i < cfg.layers; ++i) {
        auto y = tape.relu(tape.add_channel_bias(tape.conv2d(cat, params.kernels[i], 1, 1), params.biases[i]));
        cat = tape.concat0({cat, y});
    }
    return cat;
}

}  // namespace stfa
