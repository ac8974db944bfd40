#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stfa/tape.hpp"

namespace stfa {

class Rng;

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

struct DenseBlockConfig {
    int layers = 3;
    int growth = 8;
    int in_channels = 1;

    int out_channels() const { return in_channels + layers * growth; }
};

// One 3x3 conv + bias per layer; layer i sees in_channels + i*growth inputs.
struct DenseBlockParams {
    std::vector<TensorPtr> kernels;
    std::vector<TensorPtr> biases;

    NamedParams named(const std::string& prefix) const;
};

DenseBlockParams init_dense_block(const DenseBlockConfig& cfg, Rng& rng);

// Input-first concatenation: the first in_channels output channels are the
// input itself, then each layer's relu(conv) output in order.
TensorPtr dense_block_forward(Tape& tape, TensorPtr x, const DenseBlockConfig& cfg, const DenseBlockParams& params);

}  // namespace stfa
