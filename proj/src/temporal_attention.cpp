#include "stfa/temporal_attention.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "stfa/rng.hpp"

namespace stfa {

namespace {

std::shared_ptr<std::vector<std::int64_t>> patch_permutation(int c, int grid, bool inverse) {
    const int p = grid / 3;
    const int d = c * p * p;
    auto idx = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(9) * d);
    for (int py = 0; py < 3; ++py)
        for (int px = 0; px < 3; ++px)
            for (int ci = 0; ci < c; ++ci)
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx) {
                        const std::int64_t seq = static_cast<std::int64_t>(py * 3 + px) * d + (ci * p + dy) * p + dx;
                        const std::int64_t img = static_cast<std::int64_t>(ci) * grid * grid +
                                                 (py * p + dy) * grid + (px * p + dx);
                        if (inverse)
                            (*idx)[static_cast<std::size_t>(img)] = seq;
                        else
                            (*idx)[static_cast<std::size_t>(seq)] = img;
                    }
    return idx;
}

}  // namespace

NamedParams TemporalAttentionParams::named(const std::string& prefix) const {
    return {
        {prefix + "/conv/kernel", conv_kernel}, {prefix + "/conv/bias", conv_bias},
        {prefix + "/proj/weight", proj_weight}, {prefix + "/proj/bias", proj_bias},
        {prefix + "/pos", pos},                 {prefix + "/cls", cls},
        {prefix + "/attn/wq", wq},              {prefix + "/attn/wk", wk},
        {prefix + "/attn/wv", wv},              {prefix + "/mlp/w1", mlp_w1},
        {prefix + "/mlp/b1", mlp_b1},           {prefix + "/mlp/w2", mlp_w2},
        {prefix + "/mlp/b2", mlp_b2},           {prefix + "/template", fake_template},
    };
}

int patch_grid_for(int h, int w) {
    if (h < 3 || w < 3)
        throw std::invalid_argument("temporal attention needs extents >= 3, got " + std::to_string(h) + "x" +
                                    std::to_string(w));
    return (h >= 6 && w >= 6) ? 6 : 3;
}

TemporalAttentionParams init_temporal_attention(const TemporalAttentionConfig& cfg, int h, int w, Rng& rng) {
    const int grid = patch_grid_for(h, w);
    const int p = grid / 3;
    const int d = cfg.conv_channels * p * p;
    const int c = cfg.embed_dim;
    auto lim = [](int fan_in) { return std::sqrt(3.0 / fan_in); };

    TemporalAttentionParams out;
    // relu-feeding biases start slightly positive: keeps units live and the
    // pre-activations off the kink that finite differences cannot straddle
    out.conv_kernel = rand_uniform({cfg.conv_channels, cfg.residual_channels, 3, 3}, rng,
                                   -lim(cfg.residual_channels * 9), lim(cfg.residual_channels * 9));
    out.conv_bias = full({cfg.conv_channels}, 0.05);
    out.proj_weight = rand_uniform({d, c}, rng, -lim(d), lim(d));
    out.proj_bias = zeros({c});
    out.pos = rand_uniform({9, c}, rng, -0.1, 0.1);
    out.cls = rand_uniform({1, c}, rng, -0.1, 0.1);
    out.wq = rand_uniform({c, c}, rng, -lim(c), lim(c));
    out.wk = rand_uniform({c, c}, rng, -lim(c), lim(c));
    out.wv = rand_uniform({c, c}, rng, -lim(c), lim(c));
    out.mlp_w1 = rand_uniform({c, 2 * c}, rng, -lim(c), lim(c));
    out.mlp_b1 = full({2 * c}, 0.05);
    out.mlp_w2 = rand_uniform({2 * c, c}, rng, -lim(2 * c), lim(2 * c));
    out.mlp_b2 = zeros({c});
    out.fake_template = rand_uniform({c}, rng, -0.5, 0.5);
    return out;
}

TensorPtr pool_to_grid(Tape& tape, TensorPtr x, int grid) {
    if (x->rank() != 3) throw std::invalid_argument("pool_to_grid expects [C,H,W], got " + shape_str(x->shape));
    const int h = x->dim(1), w = x->dim(2);
    if (h < grid || w < grid)
        throw std::invalid_argument("pool_to_grid: extents " + std::to_string(h) + "x" + std::to_string(w) +
                                    " below grid " + std::to_string(grid));
    const int ph = h / grid, pw = w / grid;
    auto pooled = tape.avg_pool(x, ph, pw, ph, pw);
    if (pooled->dim(1) == grid && pooled->dim(2) == grid) return pooled;
    const int c = pooled->dim(0), oh = pooled->dim(1), ow = pooled->dim(2);
    auto idx = std::make_shared<std::vector<std::int64_t>>();
    idx->reserve(static_cast<std::size_t>(c) * grid * grid);
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < grid; ++y)
            for (int xx = 0; xx < grid; ++xx)
                idx->push_back(static_cast<std::int64_t>(ci) * oh * ow + static_cast<std::int64_t>(y) * ow + xx);
    return tape.gather(pooled, idx, {c, grid, grid});
}

TensorPtr patchify(Tape& tape, TensorPtr x) {
    if (x->rank() != 3) throw std::invalid_argument("patchify expects [C,G,G], got " + shape_str(x->shape));
    const int c = x->dim(0), g = x->dim(1);
    if (g < 3 || x->dim(2) != g || g % 3 != 0)
        throw std::invalid_argument("patchify needs square extents divisible by 3, got " + shape_str(x->shape));
    const int p = g / 3;
    return tape.gather(x, patch_permutation(c, g, false), {9, c * p * p});
}

TensorPtr unpatchify(Tape& tape, TensorPtr seq, int channels, int grid) {
    const int p = grid / 3;
    if (seq->rank() != 2 || seq->dim(0) != 9 || grid % 3 != 0 || seq->dim(1) != channels * p * p)
        throw std::invalid_argument("unpatchify: sequence " + shape_str(seq->shape) + " does not tile " +
                                    std::to_string(channels) + "x" + std::to_string(grid) + "x" + std::to_string(grid));
    return tape.gather(seq, patch_permutation(channels, grid, true), {channels, grid, grid});
}

TensorPtr embed_patches(Tape& tape, TensorPtr seq, const TemporalAttentionParams& p) {
    return tape.add(tape.add_rowwise(tape.matmul(seq, p.proj_weight), p.proj_bias), p.pos);
}

TensorPtr encode(Tape& tape, TensorPtr x, const TemporalAttentionParams& p, TensorPtr* attn) {
    if (x->rank() != 2 || x->dim(0) != 9)
        throw std::invalid_argument("encode expects the [9,C] patch matrix, got " + shape_str(x->shape));
    const int c = x->dim(1);
    auto x0 = tape.concat0({p.cls, x});
    auto q = tape.matmul(x0, p.wq);
    auto k = tape.matmul(x0, p.wk);
    auto v = tape.matmul(x0, p.wv);
    auto a = tape.softmax(tape.div_scalar(tape.matmul(q, tape.transpose2d(k)), std::sqrt(static_cast<double>(c))), 1);
    if (attn) *attn = a;
    auto x1 = tape.add(x0, tape.matmul(a, v));
    auto hidden = tape.relu(tape.add_rowwise(tape.matmul(x1, p.mlp_w1), p.mlp_b1));
    auto mlp = tape.add_rowwise(tape.matmul(hidden, p.mlp_w2), p.mlp_b2);
    return tape.add(x1, mlp);
}

TensorPtr template_attention(Tape& tape, TensorPtr latent, TensorPtr fake_template) {
    if (latent->rank() != 2 || latent->dim(0) != 10)
        throw std::invalid_argument("template_attention expects the [10,C] latent, got " + shape_str(latent->shape));
    const int c = latent->dim(1);
    if (fake_template->size() != c)
        throw std::invalid_argument("template size " + shape_str(fake_template->shape) + " does not match latent " +
                                    shape_str(latent->shape));
    auto patches = tape.slice0(latent, 1, 10);
    auto dots = tape.matmul(patches, tape.reshape(fake_template, {c, 1}));
    return tape.reshape(tape.softmax(dots, 0), {3, 3});
}

TensorPtr apply_temporal_attention(Tape& tape, TensorPtr deep, TensorPtr map3x3) {
    if (deep->rank() != 3) throw std::invalid_argument("apply_temporal_attention expects [C,H,W], got " + shape_str(deep->shape));
    if (map3x3->rank() != 2 || map3x3->dim(0) != 3 || map3x3->dim(1) != 3)
        throw std::invalid_argument("attention map must be 3x3, got " + shape_str(map3x3->shape));
    const int h = deep->dim(1), w = deep->dim(2);
    if (h % 3 != 0 || w % 3 != 0)
        throw std::invalid_argument("extents " + std::to_string(h) + "x" + std::to_string(w) +
                                    " not divisible by the 3x3 map");
    auto up = tape.upsample_nearest(tape.reshape(map3x3, {1, 3, 3}), h / 3, w / 3);
    return tape.channel_scale(deep, tape.reshape(up, {h, w}));
}

TemporalForwardOut temporal_forward(Tape& tape, TensorPtr residual, const TemporalAttentionConfig& cfg,
                                    const TemporalAttentionParams& p) {
    if (residual->rank() != 3 || residual->dim(0) != cfg.residual_channels)
        throw std::invalid_argument("temporal_forward expects [" + std::to_string(cfg.residual_channels) +
                                    ",H,W], got " + shape_str(residual->shape));
    const int grid = patch_grid_for(residual->dim(1), residual->dim(2));
    auto features = tape.relu(tape.add_channel_bias(tape.conv2d(residual, p.conv_kernel, 1, 1), p.conv_bias));
    auto pooled = pool_to_grid(tape, features, grid);
    auto latent = encode(tape, embed_patches(tape, patchify(tape, pooled), p), p);

    TemporalForwardOut out;
    out.map = cfg.uniform_map ? full({3, 3}, 1.0 / 9.0) : template_attention(tape, latent, p.fake_template);
    out.class_latent = tape.reshape(tape.slice0(latent, 0, 1), {cfg.embed_dim});
    out.guided_pool = tape.global_avg_pool(apply_temporal_attention(tape, pooled, out.map));
    return out;
}

}  // namespace stfa
