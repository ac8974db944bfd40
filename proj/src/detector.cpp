#include "stfa/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "stfa/errors.hpp"
#include "stfa/flow.hpp"

namespace stfa {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

TensorPtr conv_init(Shape shape, int fan_in, Rng& rng) {
    const double lim = std::sqrt(3.0 / fan_in);
    return rand_uniform(std::move(shape), rng, -lim, lim);
}

void check_stage_shape(const char* stage, const TensorPtr& x, const Shape& want) {
    if (x->shape != want)
        throw std::invalid_argument(std::string("detector/") + stage + ": expected shape " +
                                    shape_str(want) + ", got " + shape_str(x->shape));
}

}  // namespace

void ModelConfig::validate() const {
    require(input_h >= 3 && input_w >= 3, "detector/config: input extents below 3x3");
    require(dense.layers >= 0 && dense.growth > 0 && dense.in_channels > 0,
            "detector/config: bad dense block");
    require(attention_maps >= 1, "detector/config: need at least one spatial map");
    require(!blocks.empty(), "detector/config: backbone needs at least one block");
    int h = input_h, w = input_w;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        require(blocks[i].channels > 0, "detector/config: block channels must be positive");
        require(blocks[i].stride == 1 || blocks[i].stride == 2,
                "detector/config: block stride must be 1 or 2");
        if (blocks[i].stride == 2) {
            require(h % 2 == 0 && w % 2 == 0,
                    "detector/config: block " + std::to_string(i) + " cannot halve " +
                        std::to_string(h) + "x" + std::to_string(w));
            h /= 2;
            w /= 2;
        }
    }
    require(temporal.residual_channels == 2, "detector/config: residual input is two-channel");
    require(temporal.conv_channels > 0 && temporal.embed_dim > 0, "detector/config: bad temporal dims");
    require(lookahead >= 1, "detector/config: lookahead must be positive");
    require(flow_iters >= 1, "detector/config: flow_iters must be positive");
    require(flow_alpha > 0.0, "detector/config: flow_alpha must be positive");
}

void TrainConfig::validate() const {
    require(max_epochs >= 1, "train/config: max_epochs must be positive");
    require(patience >= 1, "train/config: patience must be at least 1");
    require(lr >= 0.0, "train/config: negative learning rate");
    require(batch >= 1, "train/config: batch must be positive");
    require(split_ratio > 0.0 && split_ratio < 1.0, "train/config: split ratio outside (0,1)");
    require(frames_per_clip >= 1, "train/config: frames_per_clip must be positive");
}

NamedParams ResidualBlockParams::named(const std::string& prefix) const {
    return {
        {prefix + "/conv1", conv1},         {prefix + "/bias1", bias1},
        {prefix + "/conv2", conv2},         {prefix + "/bias2", bias2},
        {prefix + "/skip", skip},           {prefix + "/skip_bias", skip_bias},
    };
}

NamedParams DetectorParams::named() const {
    NamedParams all = dense.named("dense");
    for (auto& kv : spatial.named("spatial")) all.push_back(std::move(kv));
    for (std::size_t i = 0; i < blocks.size(); ++i)
        for (auto& kv : blocks[i].named("block" + std::to_string(i))) all.push_back(std::move(kv));
    for (auto& kv : temporal.named("temporal")) all.push_back(std::move(kv));
    all.push_back({"fuse/weight", fuse_weight});
    all.push_back({"fuse/bias", fuse_bias});
    return all;
}

DetectorParams init_detector(const ModelConfig& cfg) {
    cfg.validate();
    DetectorParams p;
    {
        Rng rng(derive_seed(cfg.seed, "dense"));
        p.dense = init_dense_block(cfg.dense, rng);
    }
    {
        Rng rng(derive_seed(cfg.seed, "spatial"));
        p.spatial = init_spatial_attention({cfg.attention_maps, cfg.dense.out_channels()}, rng);
    }
    int cin = cfg.dense.out_channels();
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
        Rng rng(derive_seed(cfg.seed, "block" + std::to_string(i)));
        const int cout = cfg.blocks[i].channels;
        ResidualBlockParams b;
        b.conv1 = conv_init({cout, cin, 3, 3}, cin * 9, rng);
        b.bias1 = zeros({cout});
        b.conv2 = conv_init({cout, cout, 3, 3}, cout * 9, rng);
        b.bias2 = zeros({cout});
        b.skip = conv_init({cout, cin, 1, 1}, cin, rng);
        b.skip_bias = zeros({cout});
        p.blocks.push_back(std::move(b));
        cin = cout;
    }
    {
        Rng rng(derive_seed(cfg.seed, "temporal"));
        p.temporal = init_temporal_attention(cfg.temporal, cfg.input_h, cfg.input_w, rng);
    }
    {
        Rng rng(derive_seed(cfg.seed, "fuse"));
        p.fuse_weight = conv_init({cfg.fusion_width(), 1}, cfg.fusion_width(), rng);
        p.fuse_bias = zeros({1, 1});
    }
    return p;
}

TensorPtr residual_block_forward(Tape& tape, TensorPtr x, const ResidualBlockSpec& spec,
                                 const ResidualBlockParams& p) {
    TensorPtr in = spec.stride == 2 ? tape.avg_pool(x, 2, 2) : x;
    auto main = tape.relu(tape.add_channel_bias(tape.conv2d(in, p.conv1, 1, 1), p.bias1));
    main = tape.add_channel_bias(tape.conv2d(main, p.conv2, 1, 1), p.bias2);
    auto skip = tape.add_channel_bias(tape.conv2d(in, p.skip, 1, 0), p.skip_bias);
    return tape.relu(tape.add(main, skip));
}

TensorPtr detector_forward(Tape& tape, TensorPtr frame, TensorPtr residual,
                           const ModelConfig& cfg, const DetectorParams& p,
                           DetectorTrace* trace) {
    check_stage_shape("frame", frame, {cfg.dense.in_channels, cfg.input_h, cfg.input_w});
    check_stage_shape("residual", residual,
                      {cfg.temporal.residual_channels, cfg.input_h, cfg.input_w});
    if (p.blocks.size() != cfg.blocks.size())
        throw std::invalid_argument("detector/backbone: config lists " +
                                    std::to_string(cfg.blocks.size()) + " blocks, params carry " +
                                    std::to_string(p.blocks.size()));

    auto enhanced = dense_block_forward(tape, frame, cfg.dense, p.dense);
    auto maps = spatial_attention_maps(tape, enhanced, p.spatial);
    auto attended = apply_spatial_attention(tape, enhanced, maps);
    auto deep = attended;
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i)
        deep = residual_block_forward(tape, deep, cfg.blocks[i], p.blocks[i]);
    auto pooled = tape.global_avg_pool(deep);

    auto temporal = temporal_forward(tape, residual, cfg.temporal, p.temporal);
    if (trace) {
        trace->spatial_maps = maps;
        trace->temporal_map = temporal.map;
    }

    auto fused = tape.concat0({pooled, temporal.class_latent, temporal.guided_pool});
    auto logit = tape.add(tape.matmul(tape.reshape(fused, {1, cfg.fusion_width()}), p.fuse_weight),
                          p.fuse_bias);
    return tape.sigmoid(tape.reshape(logit, {1}));
}

TensorPtr frame_tensor(const ColorImage& img) {
    require(img.h > 0 && img.w > 0, "detector: empty frame");
    const std::size_t plane = static_cast<std::size_t>(img.h) * img.w;
    std::vector<double> data(3 * plane);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c)
                data[c * plane + static_cast<std::size_t>(y) * img.w + x] = img.at(y, x, c);
    return tensor({3, img.h, img.w}, std::move(data));
}

int usable_frames(const VideoClip& clip, const ModelConfig& cfg) {
    return static_cast<int>(clip.frames.size()) - cfg.lookahead;
}

FrameFeatures compute_frame_features(const VideoClip& clip, int t, const ModelConfig& cfg) {
    const int frames = static_cast<int>(clip.frames.size());
    require(t >= 0 && t + cfg.lookahead < frames,
            "detector: frame " + std::to_string(t) + " lacks a " + std::to_string(cfg.lookahead) +
                "-frame lookahead in a " + std::to_string(frames) + "-frame clip");
    const Image base = luma(clip.frames[static_cast<std::size_t>(t)]);
    const int h = base.h, w = base.w;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> data(2 * plane, 0.0);
    for (int k = 1; k <= cfg.lookahead; ++k) {
        FramePair pair(base, luma(clip.frames[static_cast<std::size_t>(t + k)]));
        const FlowField flow = horn_schunck(pair, cfg.flow_alpha, cfg.flow_iters);
        const MotionResidual res = motion_residual(pair, flow);
        for (std::size_t i = 0; i < plane; ++i) {
            data[i] += res.diff[i];
            data[plane + i] += res.mag[i];
        }
    }
    for (auto& v : data) v /= cfg.lookahead;

    FrameFeatures f;
    f.frame = frame_tensor(clip.frames[static_cast<std::size_t>(t)]);
    f.residual = tensor({2, h, w}, std::move(data));
    return f;
}

double predict_frame(const ModelConfig& cfg, const DetectorParams& p, const FrameFeatures& f) {
    Tape tape;
    return detector_forward(tape, f.frame, f.residual, cfg, p)->data[0];
}

double predict_clip(const VideoClip& clip, const ModelConfig& cfg, const DetectorParams& p) {
    const int usable = usable_frames(clip, cfg);
    require(usable >= 1, "detector: clip has " + std::to_string(clip.frames.size()) +
                             " frames, needs at least " + std::to_string(cfg.lookahead + 1));
    double acc = 0.0;
    for (int t = 0; t < usable; ++t)
        acc += predict_frame(cfg, p, compute_frame_features(clip, t, cfg));
    return acc / usable;
}

namespace {

struct Example {
    FrameFeatures feats;
    double label = 0.0;
};

// evenly spaced usable frame indices, deduplicated when the clip is shorter
// than the requested sample count
std::vector<int> sample_frames(int usable, int count) {
    std::vector<int> out;
    for (int k = 0; k < count; ++k) {
        const int t = static_cast<int>((k + 0.5) * usable / count);
        if (out.empty() || out.back() != t) out.push_back(t);
    }
    return out;
}

std::vector<std::vector<double>> snapshot(const NamedParams& names) {
    std::vector<std::vector<double>> data;
    data.reserve(names.size());
    for (const auto& [name, t] : names) data.push_back(t->data);
    return data;
}

}  // namespace

TrainResult train_detector(const std::vector<VideoClip>& clips, const ModelConfig& mcfg,
                           const TrainConfig& tcfg, std::ostream* log_stream,
                           const DetectorParams* warm_start) {
    mcfg.validate();
    tcfg.validate();
    require(!clips.empty(), "train: empty corpus");
    for (const auto& c : clips)
        require(usable_frames(c, mcfg) >= 1,
                "train: clip " + c.id + " has " + std::to_string(c.frames.size()) +
                    " frames, needs at least " + std::to_string(mcfg.lookahead + 1));

    // split: honour tags when every clip carries one, else seeded shuffle
    std::vector<int> train_idx, val_idx;
    bool any_tag = false, all_tags = true;
    for (const auto& c : clips) {
        const bool tagged = c.split == "train" || c.split == "val";
        any_tag = any_tag || tagged;
        all_tags = all_tags && tagged;
    }
    if (any_tag && !all_tags) throw std::invalid_argument("train: corpus mixes tagged and untagged clips");
    if (all_tags) {
        for (std::size_t i = 0; i < clips.size(); ++i)
            (clips[i].split == "train" ? train_idx : val_idx).push_back(static_cast<int>(i));
    } else {
        std::vector<int> order(clips.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Rng rng(derive_seed(tcfg.seed, "split"));
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(order.size()) - 1));
            std::swap(order[i], order[j]);
        }
        const auto n_train = static_cast<std::size_t>(
            std::llround(tcfg.split_ratio * static_cast<double>(order.size())));
        for (std::size_t k = 0; k < order.size(); ++k)
            (k < n_train ? train_idx : val_idx).push_back(order[k]);
    }
    require(!train_idx.empty(), "train: empty training split");

    int pos = 0, neg = 0;
    for (int i : train_idx) (clips[static_cast<std::size_t>(i)].label ? pos : neg) += 1;
    require(pos > 0 && neg > 0, "train: single-class training split (" + std::to_string(pos) +
                                    " fake / " + std::to_string(neg) + " real)");

    // tiny corpora may leave validation empty; score the training clips then
    const std::vector<int>& val_clips = val_idx.empty() ? train_idx : val_idx;

    std::vector<Example> examples;
    for (int i : train_idx) {
        const auto& clip = clips[static_cast<std::size_t>(i)];
        for (int t : sample_frames(usable_frames(clip, mcfg), tcfg.frames_per_clip))
            examples.push_back({compute_frame_features(clip, t, mcfg), static_cast<double>(clip.label)});
    }
    struct ValClip {
        std::vector<FrameFeatures> feats;
        double label = 0.0;
    };
    std::vector<ValClip> val_feats;
    for (int i : val_clips) {
        const auto& clip = clips[static_cast<std::size_t>(i)];
        ValClip v;
        v.label = static_cast<double>(clip.label);
        for (int t : sample_frames(usable_frames(clip, mcfg), tcfg.frames_per_clip))
            v.feats.push_back(compute_frame_features(clip, t, mcfg));
        val_feats.push_back(std::move(v));
    }

    DetectorParams params = warm_start ? *warm_start : init_detector(mcfg);
    const NamedParams names = params.named();

    TrainResult result;
    auto emit = [&](const std::string& line) {
        result.log_lines.push_back(line);
        if (log_stream) (*log_stream) << line << '\n';
    };
    {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "training %zu frame examples from %zu clips (%zu val), batch %d, lr %g",
                      examples.size(), train_idx.size(), val_clips.size(), tcfg.batch, tcfg.lr);
        emit(buf);
    }

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_state = snapshot(names);
    int best_epoch = 0;
    int stale = 0;

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        Rng rng(derive_seed(tcfg.seed, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(
                static_cast<std::int64_t>(i), static_cast<std::int64_t>(order.size()) - 1));
            std::swap(order[i], order[j]);
        }

        double train_sq = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(tcfg.batch)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(tcfg.batch));
            Tape tape;
            std::vector<TensorPtr> scores;
            std::vector<double> targets;
            for (std::size_t k = begin; k < end; ++k) {
                const Example& ex = examples[order[k]];
                scores.push_back(detector_forward(tape, ex.feats.frame, ex.feats.residual, mcfg, params));
                targets.push_back(ex.label);
            }
            auto preds = tape.concat0(scores);
            auto loss = tape.mse_loss(preds, tensor({static_cast<int>(targets.size())}, targets));
            if (!preds->all_finite() || !std::isfinite(loss->data[0]))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch starting at example " + std::to_string(begin));
            tape.backward(loss);
            for (const auto& [name, t] : names) {
                if (t->grad.empty()) continue;
                for (std::size_t i = 0; i < t->data.size(); ++i) t->data[i] -= tcfg.lr * t->grad[i];
                t->zero_grad();
            }
            train_sq += loss->data[0] * static_cast<double>(end - begin);
        }
        const double train_loss = train_sq / static_cast<double>(examples.size());

        double val_sq = 0.0;
        for (const auto& v : val_feats) {
            double score = 0.0;
            for (const auto& f : v.feats) score += predict_frame(mcfg, params, f);
            score /= static_cast<double>(v.feats.size());
            val_sq += (score - v.label) * (score - v.label);
        }
        const double val_loss = val_sq / static_cast<double>(val_feats.size());
        if (!std::isfinite(val_loss))
            throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));

        const bool improved = val_loss < best;
        if (improved) {
            best = val_loss;
            best_epoch = epoch;
            best_state = snapshot(names);
            stale = 0;
        } else {
            ++stale;
        }
        result.log.push_back({epoch, train_loss, val_loss, improved});
        {
            char buf[160];
            std::snprintf(buf, sizeof buf, "epoch %03d  train_loss %.12e  val_loss %.12e%s", epoch,
                          train_loss, val_loss, improved ? "  *" : "");
            emit(buf);
        }
        if (stale >= tcfg.patience) break;
    }

    for (std::size_t i = 0; i < names.size(); ++i) names[i].second->data = std::move(best_state[i]);
    {
        char buf[120];
        std::snprintf(buf, sizeof buf, "best epoch %03d  val_loss %.12e", best_epoch, best);
        emit(buf);
    }
    result.params = std::move(params);
    result.best_epoch = best_epoch;
    result.best_val_loss = best;
    return result;
}

EvalResult evaluate_clips(const std::vector<VideoClip>& clips, const ModelConfig& cfg,
                          const DetectorParams& p, double threshold) {
    require(!clips.empty(), "eval: empty clip list");
    EvalResult r;
    for (const auto& clip : clips) {
        r.scores.push_back(predict_clip(clip, cfg, p));
        r.labels.push_back(clip.label);
    }
    r.cm = confusion(r.scores, r.labels, threshold);
    r.rates = metrics(r.cm);
    r.auc = auc(r.scores, r.labels);
    return r;
}

}  // namespace stfa
