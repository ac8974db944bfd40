#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "stfa/corpus.hpp"
#include "stfa/metrics.hpp"
#include "stfa/spatial_attention.hpp"
#include "stfa/temporal_attention.hpp"

namespace stfa {

// stride 2 halves both extents by average pooling at the block entry; a
// strided 3x3 conv would need odd padded extents, which 32-scale inputs
// never give.
struct ResidualBlockSpec {
    int channels = 0;
    int stride = 1;
};

struct ModelConfig {
    int input_h = 32;
    int input_w = 32;
    DenseBlockConfig dense{.layers = 3, .growth = 8, .in_channels = 3};
    int attention_maps = 4;
    std::vector<ResidualBlockSpec> blocks = {{16, 2}, {32, 2}, {64, 2}};
    TemporalAttentionConfig temporal;
    int lookahead = 2;   // motion residuals averaged over the next n frames
    int flow_iters = 60;
    double flow_alpha = 1.0;
    std::uint64_t seed = 0;

    // backbone pool + temporal class latent + attention-guided pool
    int fusion_width() const {
        return blocks.back().channels + temporal.embed_dim + temporal.conv_channels;
    }
    void validate() const;
};

struct ResidualBlockParams {
    TensorPtr conv1, bias1;      // [C_out, C_in, 3, 3], [C_out]
    TensorPtr conv2, bias2;      // [C_out, C_out, 3, 3], [C_out]
    TensorPtr skip, skip_bias;   // [C_out, C_in, 1, 1], [C_out]

    NamedParams named(const std::string& prefix) const;
};

struct DetectorParams {
    DenseBlockParams dense;
    SpatialAttentionParams spatial;
    std::vector<ResidualBlockParams> blocks;
    TemporalAttentionParams temporal;
    TensorPtr fuse_weight;  // [fusion_width, 1]
    TensorPtr fuse_bias;    // [1, 1]

    NamedParams named() const;
};

DetectorParams init_detector(const ModelConfig& cfg);

TensorPtr residual_block_forward(Tape& tape, TensorPtr x, const ResidualBlockSpec& spec,
                                 const ResidualBlockParams& p);

struct DetectorTrace {
    TensorPtr spatial_maps;  // [M, H, W]
    TensorPtr temporal_map;  // [3, 3]
};

// frame [3,H,W] and residual [2,H,W] to a sigmoid score, shape [1].
TensorPtr detector_forward(Tape& tape, TensorPtr frame, TensorPtr residual,
                           const ModelConfig& cfg, const DetectorParams& p,
                           DetectorTrace* trace = nullptr);

// Planar [3,H,W] from an interleaved color raster.
TensorPtr frame_tensor(const ColorImage& img);

struct FrameFeatures {
    TensorPtr frame;     // [3, H, W]
    TensorPtr residual;  // [2, H, W]: mean |frame delta|, mean flow magnitude
};

// Flow-based residuals for frame t against its next `lookahead` frames.
FrameFeatures compute_frame_features(const VideoClip& clip, int t, const ModelConfig& cfg);

// Frames with a full lookahead window; the clip must keep at least one.
int usable_frames(const VideoClip& clip, const ModelConfig& cfg);

double predict_frame(const ModelConfig& cfg, const DetectorParams& p, const FrameFeatures& f);

// Mean of the per-frame scores over every usable frame.
double predict_clip(const VideoClip& clip, const ModelConfig& cfg, const DetectorParams& p);

struct TrainConfig {
    int max_epochs = 80;
    int patience = 10;
    double lr = 0.05;
    int batch = 16;
    double split_ratio = 0.8;  // only for clips that carry no split tags
    double threshold = 0.5;
    int frames_per_clip = 2;   // evenly spaced usable frames per training clip
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    bool improved = false;
};

struct TrainResult {
    DetectorParams params;  // best-validation state
    std::vector<EpochLog> log;
    std::vector<std::string> log_lines;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

// Minibatch SGD on MSE between frame scores and clip labels. Clips tagged
// train/val keep their tags; an untagged corpus is split by seeded shuffle
// at split_ratio. A corpus whose training side is single-class is rejected.
// If no clip lands in val, validation scores the training clips instead
// (tiny toy corpora). Stops when validation loss has not improved for
// `patience` epochs, returns the best-validation parameters. Non-finite
// losses or scores abort with NumericError. Two runs with the same inputs
// produce byte-identical log lines. `warm_start`, when given, replaces the
// seeded parameter init.
TrainResult train_detector(const std::vector<VideoClip>& clips, const ModelConfig& mcfg,
                           const TrainConfig& tcfg, std::ostream* log_stream = nullptr,
                           const DetectorParams* warm_start = nullptr);

struct EvalResult {
    ConfusionMatrix cm;
    Metrics rates;
    double auc = 0.0;
    std::vector<double> scores;  // clip order
    std::vector<int> labels;
};

EvalResult evaluate_clips(const std::vector<VideoClip>& clips, const ModelConfig& cfg,
                          const DetectorParams& p, double threshold);

// Single little-endian binary file: magic "STFA", version u32, entry count
// u32, then per entry {path len u16, UTF-8 path, rank u8, extents u32[],
// float64 payload}. Parameters are keyed by their canonical paths; epoch,
// best validation loss, and the config echo ride along as __meta__ entries.
void save_checkpoint(const std::filesystem::path& path, const DetectorParams& params,
                     const ModelConfig& cfg, int epoch, double best_val_loss);

struct LoadedCheckpoint {
    ModelConfig config;
    DetectorParams params;
    int epoch = 0;
    double best_val_loss = 0.0;
};

// Missing or mis-shaped parameter entries are rejected listing every
// offending path.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string model_config_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace stfa
