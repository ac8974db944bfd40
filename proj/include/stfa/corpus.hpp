#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stfa/image.hpp"
#include "stfa/rng.hpp"

namespace stfa {

struct VideoClip {
    std::vector<ColorImage> frames;  // >= 3, uniform extents
    int label = 0;                   // 0 real, 1 fake
    std::string id;
    std::string split;  // "train" or "val"
};

// Generator knobs. A fake differs from its real twin only by the injected
// artifacts, so zero amplitudes and patch size leave the twin bit-identical.
struct CorpusSpec {
    int clips_per_class = 100;
    int frames = 8;
    int height = 32;
    int width = 32;
    double motion = 1.5;    // smooth-path amplitude, px
    double flicker = 0.08;  // per-frame brightness offset bound
    double jitter = 1.0;    // per-frame displacement bound, px
    int patch = 10;         // tampered square side, 0 disables
    std::uint64_t seed = 0;
};

// Gradient background plus Gaussian blobs, sampled analytically along a
// smooth sinusoidal translation path. No resampling, so the motion itself
// carries no interpolation artifacts.
VideoClip generate_real_clip(const CorpusSpec& spec, Rng& rng);

// Copies the twin, then per frame independently: brightness flicker,
// bilinear subpixel jitter with replicated borders, and re-textured noise
// in a fixed centered patch.
VideoClip generate_fake_clip(const VideoClip& twin, const CorpusSpec& spec, Rng& rng);

// One manifest row. `dir` is relative to the manifest's directory; `line`
// is the 1-based line in the file, carried so clip loading can report it.
struct ClipRecord {
    std::string dir;
    int label = 0;
    std::string split;
    int line = 0;
};

// Seeded shuffle of twin-pair indices; the first round(ratio * pairs) land
// in train. Splitting whole pairs keeps a scene out of both sets at once.
std::vector<std::string> assign_pair_splits(int pairs, double ratio, std::uint64_t seed);

void write_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records);
std::vector<ClipRecord> load_manifest(const std::filesystem::path& path);

// Reads frame_0000.ppm, frame_0001.ppm, ... under root/rec.dir.
VideoClip load_clip(const std::filesystem::path& root, const ClipRecord& rec);
std::vector<VideoClip> load_corpus(const std::filesystem::path& manifest_path);

// Writes clips_per_class twin pairs plus manifest.csv under out_dir and
// returns the records in manifest order. Each clip draws from its own
// derived stream, so generation order (or parallelism) cannot change the
// output.
std::vector<ClipRecord> generate_corpus(const CorpusSpec& spec,
                                        const std::filesystem::path& out_dir);

// Mean flow incoherence over consecutive luma frame pairs.
double clip_incoherence(const VideoClip& clip, double alpha = 1.0, int iters = 200);

// Mean absolute per-pixel change between consecutive frames, all channels.
double clip_mean_abs_diff(const VideoClip& clip);

}  // namespace stfa
