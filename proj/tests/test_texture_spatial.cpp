#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stfa/rng.hpp"
#include "stfa/spatial_attention.hpp"
#include "stfa/texture.hpp"

using namespace stfa;

TEST_CASE("dense block channel arithmetic") {
    CHECK(DenseBlockConfig{0, 8, 5}.out_channels() == 5);
    CHECK(DenseBlockConfig{2, 3, 4}.out_channels() == 10);
    CHECK(DenseBlockConfig{3, 8, 3}.out_channels() == 27);

    Rng rng(1);
    DenseBlockConfig cfg{2, 3, 4};
    auto params = init_dense_block(cfg, rng);
    Tape t;
    auto x = rand_uniform({4, 5, 5}, rng, -1.0, 1.0);
    auto y = dense_block_forward(t, x, cfg, params);
    CHECK(y->shape == Shape{10, 5, 5});
}

TEST_CASE("empty dense block is the identity") {
    Rng rng(2);
    DenseBlockConfig cfg{0, 8, 3};
    auto params = init_dense_block(cfg, rng);
    Tape t;
    auto x = rand_uniform({3, 4, 4}, rng, -1.0, 1.0);
    auto y = dense_block_forward(t, x, cfg, params);
    CHECK(y->data == x->data);
}

TEST_CASE("dense block passes the input through as its first channels") {
    Rng rng(3);
    DenseBlockConfig cfg{3, 2, 2};
    auto params = init_dense_block(cfg, rng);
    Tape t;
    auto x = rand_uniform({2, 6, 6}, rng, -1.0, 1.0);
    auto y = dense_block_forward(t, x, cfg, params);
    CHECK(y->shape == Shape{8, 6, 6});
    for (std::size_t i = 0; i < x->data.size(); ++i) CHECK(y->data[i] == x->data[i]);
}

TEST_CASE("dense block rejects mismatched params") {
    Rng rng(4);
    DenseBlockConfig cfg{2, 3, 4};
    auto params = init_dense_block(cfg, rng);
    Tape t;
    CHECK_THROWS_AS(dense_block_forward(t, zeros({3, 5, 5}), cfg, params), std::invalid_argument);

    DenseBlockConfig other{3, 3, 4};
    CHECK_THROWS_AS(dense_block_forward(t, zeros({4, 5, 5}), other, params), std::invalid_argument);

    CHECK_THROWS_AS(init_dense_block(DenseBlockConfig{1, 0, 4}, rng), std::invalid_argument);
    CHECK_THROWS_AS(init_dense_block(DenseBlockConfig{1, 3, 0}, rng), std::invalid_argument);
}

TEST_CASE("dense block full forward gradient check") {
    DenseBlockConfig cfg{2, 2, 2};
    for (std::uint64_t seed : {71u, 72u, 73u, 74u, 75u}) {
        Rng rng(seed);
        auto x = rand_uniform({2, 4, 4}, rng, -1.0, 1.0);
        auto params = init_dense_block(cfg, rng);
        std::vector<TensorPtr> inputs{x, params.kernels[0], params.biases[0], params.kernels[1], params.biases[1]};
        auto rep = grad_check(
            "dense_block",
            [&cfg](Tape& t, const std::vector<TensorPtr>& in) {
                DenseBlockParams p;
                p.kernels = {in[1], in[3]};
                p.biases = {in[2], in[4]};
                return dense_block_forward(t, in[0], cfg, p);
            },
            inputs, 1e-5);
        INFO("seed ", seed, " max_rel_err ", rep.max_rel_err);
        CHECK(rep.pass);
    }
}

TEST_CASE("attention maps are relu-gated convolutions") {
    Rng rng(5);
    SpatialAttentionConfig cfg{4, 3};
    auto params = init_spatial_attention(cfg, rng);
    Tape t;

    auto zero_maps = spatial_attention_maps(t, zeros({3, 5, 5}), params);
    CHECK(zero_maps->shape == Shape{4, 5, 5});
    for (double v : zero_maps->data) CHECK(v == 0.0);

    SpatialAttentionParams ident;
    ident.kernel = tensor({1, 1, 1, 1}, {1.0});
    ident.bias = zeros({1});
    auto features = rand_uniform({1, 4, 4}, rng, -1.0, 1.0);
    auto maps = spatial_attention_maps(t, features, ident);
    for (std::size_t i = 0; i < features->data.size(); ++i)
        CHECK(maps->data[i] == std::max(features->data[i], 0.0));

    CHECK_THROWS_AS(init_spatial_attention(SpatialAttentionConfig{0, 3}, rng), std::invalid_argument);
}

TEST_CASE("attention maps stay non-negative across seeds") {
    SpatialAttentionConfig cfg{4, 3};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        auto params = init_spatial_attention(cfg, rng);
        Tape t;
        auto maps = spatial_attention_maps(t, rand_uniform({3, 4, 4}, rng, -2.0, 2.0), params);
        for (double v : maps->data) CHECK(v >= 0.0);
    }
}

TEST_CASE("applying uniform unit maps is the exact identity") {
    Rng rng(6);
    Tape t;
    auto shallow = rand_uniform({3, 4, 4}, rng, -1.0, 1.0);
    auto ones_maps = full({4, 4, 4}, 1.0);
    auto out = apply_spatial_attention(t, shallow, ones_maps);
    CHECK(out->data == shallow->data);

    auto zero_maps = zeros({4, 4, 4});
    auto zero_out = apply_spatial_attention(t, shallow, zero_maps);
    for (double v : zero_out->data) CHECK(v == 0.0);
}

TEST_CASE("attention mask concentrates output energy") {
    Tape t;
    auto shallow = full({2, 6, 6}, 0.5);
    auto mask = zeros({1, 6, 6});
    // unit weight only inside rows 2..3 x cols 2..3
    for (int y = 2; y <= 3; ++y)
        for (int x = 2; x <= 3; ++x) mask->data[static_cast<std::size_t>(y) * 6 + x] = 1.0;
    auto out = apply_spatial_attention(t, shallow, mask);
    double outside = 0.0, inside = 0.0;
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) {
                const double v = out->data[(static_cast<std::size_t>(c) * 6 + y) * 6 + x];
                if (y >= 2 && y <= 3 && x >= 2 && x <= 3)
                    inside += v;
                else
                    outside += std::abs(v);
            }
    CHECK(outside == 0.0);
    CHECK(inside > 0.0);
}

TEST_CASE("guided output is linear in the features") {
    Rng rng(7);
    SpatialAttentionConfig cfg{4, 2};
    auto params = init_spatial_attention(cfg, rng);
    Tape t;
    auto probe = rand_uniform({2, 5, 5}, rng, -1.0, 1.0);
    auto maps = spatial_attention_maps(t, probe, params);

    auto x = rand_uniform({2, 5, 5}, rng, -1.0, 1.0);
    auto ax = tensor(x->shape, x->data);
    const double a = 2.75;
    for (auto& v : ax->data) v *= a;
    auto out = apply_spatial_attention(t, x, maps);
    auto out_a = apply_spatial_attention(t, ax, maps);
    for (std::size_t i = 0; i < out->data.size(); ++i)
        CHECK(std::abs(out_a->data[i] - a * out->data[i]) < 1e-12);

    CHECK_THROWS_AS(apply_spatial_attention(t, zeros({2, 4, 4}), maps), std::invalid_argument);
}

TEST_CASE("spatial attention path gradient check") {
    SpatialAttentionConfig cfg{3, 2};
    for (std::uint64_t seed : {81u, 82u, 83u, 84u, 85u}) {
        Rng rng(seed);
        auto features = rand_uniform({2, 4, 4}, rng, -1.0, 1.0);
        auto shallow = rand_uniform({2, 4, 4}, rng, -1.0, 1.0);
        auto params = init_spatial_attention(cfg, rng);
        auto rep = grad_check(
            "spatial_attention",
            [](Tape& t, const std::vector<TensorPtr>& in) {
                SpatialAttentionParams p;
                p.kernel = in[2];
                p.bias = in[3];
                auto maps = spatial_attention_maps(t, in[0], p);
                return apply_spatial_attention(t, in[1], maps);
            },
            {features, shallow, params.kernel, params.bias}, 1e-5);
        INFO("seed ", seed, " max_rel_err ", rep.max_rel_err);
        CHECK(rep.pass);
    }
}
