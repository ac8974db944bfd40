#include "stfa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "stfa/errors.hpp"
#include "stfa/flow.hpp"

namespace stfa {

namespace {

constexpr double kPatchNoise = 0.25;

struct Blob {
    double cx, cy, sigma;
    double amp[3];
};

struct Scene {
    double base[3];
    double gx[3], gy[3];
    std::vector<Blob> blobs;

    void sample(double x, double y, double out[3]) const {
        for (int c = 0; c < 3; ++c) out[c] = base[c] + gx[c] * x + gy[c] * y;
        for (const auto& b : blobs) {
            const double dx = x - b.cx;
            const double dy = y - b.cy;
            const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
            for (int c = 0; c < 3; ++c) out[c] += b.amp[c] * g;
        }
        for (int c = 0; c < 3; ++c) out[c] = std::clamp(out[c], 0.0, 1.0);
    }
};

Scene make_scene(const CorpusSpec& spec, Rng& rng) {
    Scene s;
    for (int c = 0; c < 3; ++c) {
        s.base[c] = rng.uniform(0.35, 0.6);
        s.gx[c] = rng.uniform(-1.0, 1.0) * 0.25 / spec.width;
        s.gy[c] = rng.uniform(-1.0, 1.0) * 0.25 / spec.height;
    }
    const int count = 8 + static_cast<int>(rng.uniform_int(0, 4));
    for (int i = 0; i < count; ++i) {
        Blob b;
        b.cx = rng.uniform(-2.0, spec.width + 1.0);
        b.cy = rng.uniform(-2.0, spec.height + 1.0);
        b.sigma = rng.uniform(1.5, 4.0);
        const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        const double amp = sign * rng.uniform(0.25, 0.45);
        for (int c = 0; c < 3; ++c) b.amp[c] = amp * rng.uniform(0.6, 1.0);
        s.blobs.push_back(b);
    }
    return s;
}

void validate_spec(const CorpusSpec& spec) {
    if (spec.clips_per_class < 1) throw std::invalid_argument("corpus: clips_per_class must be positive");
    if (spec.frames < 3) throw std::invalid_argument("corpus: need at least 3 frames per clip");
    if (spec.height < 8 || spec.width < 8)
        throw std::invalid_argument("corpus: extents below 8x8");
    if (spec.motion < 0.0 || spec.flicker < 0.0 || spec.jitter < 0.0)
        throw std::invalid_argument("corpus: amplitudes must be non-negative");
    if (spec.patch < 0 || spec.patch > std::min(spec.height, spec.width))
        throw std::invalid_argument("corpus: patch size outside frame");
}

// Replicated borders: jittered frames drag their edge pixels, one more
// artifact the real twin never shows.
ColorImage shift_bilinear(const ColorImage& img, double dx, double dy) {
    ColorImage out(img.h, img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            const double xs = std::clamp(x + dx, 0.0, img.w - 1.0);
            const double ys = std::clamp(y + dy, 0.0, img.h - 1.0);
            const int x0 = static_cast<int>(std::floor(xs));
            const int y0 = static_cast<int>(std::floor(ys));
            const int x1 = std::min(x0 + 1, img.w - 1);
            const int y1 = std::min(y0 + 1, img.h - 1);
            const double fx = xs - x0;
            const double fy = ys - y0;
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(y0, x0, c) * (1.0 - fy) * (1.0 - fx) +
                                  img.at(y0, x1, c) * (1.0 - fy) * fx +
                                  img.at(y1, x0, c) * fy * (1.0 - fx) +
                                  img.at(y1, x1, c) * fy * fx;
            }
        }
    }
    return out;
}

std::string frame_name(int t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.ppm", t);
    return buf;
}

std::string clip_name(const char* cls, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d", cls, i);
    return buf;
}

}  // namespace

VideoClip generate_real_clip(const CorpusSpec& spec, Rng& rng) {
    validate_spec(spec);
    const Scene scene = make_scene(spec, rng);
    const double phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double omega_x = 2.0 * std::numbers::pi * rng.uniform(0.05, 0.15);
    const double omega_y = 2.0 * std::numbers::pi * rng.uniform(0.05, 0.15);

    VideoClip clip;
    clip.label = 0;
    for (int t = 0; t < spec.frames; ++t) {
        const double ox = spec.motion * std::sin(omega_x * t + phase_x);
        const double oy = spec.motion * std::sin(omega_y * t + phase_y);
        ColorImage frame(spec.height, spec.width);
        double px[3];
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                scene.sample(x + ox, y + oy, px);
                for (int c = 0; c < 3; ++c) frame.at(y, x, c) = px[c];
            }
        }
        clip.frames.push_back(std::move(frame));
    }
    return clip;
}

VideoClip generate_fake_clip(const VideoClip& twin, const CorpusSpec& spec, Rng& rng) {
    validate_spec(spec);
    if (twin.frames.empty()) throw std::invalid_argument("corpus: fake needs a real twin");

    VideoClip clip;
    clip.label = 1;
    const int h = twin.frames.front().h;
    const int w = twin.frames.front().w;
    const int py0 = (h - spec.patch) / 2;
    const int px0 = (w - spec.patch) / 2;

    for (const auto& src : twin.frames) {
        ColorImage frame = src;
        const double b = rng.uniform(-spec.flicker, spec.flicker);
        for (auto& v : frame.px) v = std::clamp(v + b, 0.0, 1.0);

        const double dx = rng.uniform(-spec.jitter, spec.jitter);
        const double dy = rng.uniform(-spec.jitter, spec.jitter);
        frame = shift_bilinear(frame, dx, dy);

        for (int y = py0; y < py0 + spec.patch; ++y)
            for (int x = px0; x < px0 + spec.patch; ++x)
                for (int c = 0; c < 3; ++c)
                    frame.at(y, x, c) = std::clamp(
                        frame.at(y, x, c) + rng.uniform(-kPatchNoise, kPatchNoise), 0.0, 1.0);

        clip.frames.push_back(std::move(frame));
    }
    return clip;
}

std::vector<std::string> assign_pair_splits(int pairs, double ratio, std::uint64_t seed) {
    if (pairs < 1) throw std::invalid_argument("corpus: need at least one pair");
    if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("corpus: ratio outside [0,1]");
    std::vector<int> perm(pairs);
    for (int i = 0; i < pairs; ++i) perm[i] = i;
    Rng rng(seed);
    for (int i = 0; i < pairs - 1; ++i) {
        const int j = static_cast<int>(rng.uniform_int(i, pairs - 1));
        std::swap(perm[i], perm[j]);
    }
    const int n_train = static_cast<int>(std::llround(ratio * pairs));
    std::vector<std::string> tags(pairs);
    for (int k = 0; k < pairs; ++k) tags[perm[k]] = k < n_train ? "train" : "val";
    return tags;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << "clip_dir,label,split\n";
    for (const auto& r : records) out << r.dir << ',' << r.label << ',' << r.split << '\n';
    if (!out) throw DataError("manifest write failed: " + path.string());
}

std::vector<ClipRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + path.string());

    auto fail = [&](int line, const std::string& what) {
        throw DataError("manifest " + path.string() + " line " + std::to_string(line) + ": " + what);
    };

    std::string row;
    int line = 0;
    std::vector<ClipRecord> records;
    while (std::getline(in, row)) {
        ++line;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (line == 1) {
            if (row != "clip_dir,label,split") fail(line, "expected header clip_dir,label,split");
            continue;
        }
        if (row.empty()) continue;
        std::istringstream ss(row);
        std::string dir, label, split, extra;
        if (!std::getline(ss, dir, ',') || !std::getline(ss, label, ',') ||
            !std::getline(ss, split, ','))
            fail(line, "expected 3 comma-separated fields");
        if (std::getline(ss, extra, ',')) fail(line, "expected 3 comma-separated fields");
        if (dir.empty()) fail(line, "empty clip_dir");
        ClipRecord rec;
        rec.dir = dir;
        rec.line = line;
        if (label == "0")
            rec.label = 0;
        else if (label == "1")
            rec.label = 1;
        else
            fail(line, "bad label '" + label + "', expected 0 or 1");
        if (split != "train" && split != "val") fail(line, "bad split '" + split + "'");
        rec.split = split;
        records.push_back(std::move(rec));
    }
    if (line == 0) throw DataError("manifest " + path.string() + " is empty");
    return records;
}

VideoClip load_clip(const std::filesystem::path& root, const ClipRecord& rec) {
    const auto dir = root / rec.dir;
    auto fail = [&](const std::string& what) {
        throw DataError("manifest line " + std::to_string(rec.line) + " (" + rec.dir + "): " + what);
    };
    if (!std::filesystem::is_directory(dir)) fail("missing clip directory");

    VideoClip clip;
    clip.label = rec.label;
    clip.split = rec.split;
    clip.id = rec.dir;
    for (int t = 0;; ++t) {
        const auto frame_path = dir / frame_name(t);
        if (!std::filesystem::exists(frame_path)) break;
        clip.frames.push_back(read_ppm(frame_path));
    }
    if (clip.frames.empty()) fail("no frames");
    if (clip.frames.size() < 3)
        fail("clip has " + std::to_string(clip.frames.size()) + " frames, need at least 3");
    for (const auto& f : clip.frames)
        if (f.h != clip.frames.front().h || f.w != clip.frames.front().w)
            fail("frame extents differ across the clip");
    return clip;
}

std::vector<VideoClip> load_corpus(const std::filesystem::path& manifest_path) {
    const auto records = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    std::vector<VideoClip> clips;
    clips.reserve(records.size());
    for (const auto& rec : records) clips.push_back(load_clip(root, rec));
    return clips;
}

std::vector<ClipRecord> generate_corpus(const CorpusSpec& spec,
                                        const std::filesystem::path& out_dir) {
    validate_spec(spec);
    std::filesystem::create_directories(out_dir);
    const auto splits =
        assign_pair_splits(spec.clips_per_class, 0.8, derive_seed(spec.seed, "split"));

    auto write_clip = [&](const VideoClip& clip, const std::string& name) {
        const auto dir = out_dir / name;
        std::filesystem::create_directories(dir);
        for (std::size_t t = 0; t < clip.frames.size(); ++t)
            write_ppm(dir / frame_name(static_cast<int>(t)), clip.frames[t]);
    };

    std::vector<ClipRecord> records;
    for (int i = 0; i < spec.clips_per_class; ++i) {
        const std::uint64_t clip_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
        Rng scene_rng(derive_seed(clip_seed, 0));
        Rng artifact_rng(derive_seed(clip_seed, 1));
        const VideoClip real = generate_real_clip(spec, scene_rng);
        const VideoClip fake = generate_fake_clip(real, spec, artifact_rng);
        write_clip(real, clip_name("real", i));
        write_clip(fake, clip_name("fake", i));
        records.push_back({clip_name("real", i), 0, splits[i], 0});
        records.push_back({clip_name("fake", i), 1, splits[i], 0});
    }
    for (std::size_t k = 0; k < records.size(); ++k)
        records[k].line = static_cast<int>(k) + 2;  // header is line 1
    write_manifest(out_dir / "manifest.csv", records);
    return records;
}

double clip_incoherence(const VideoClip& clip, double alpha, int iters) {
    if (clip.frames.size() < 2) throw std::invalid_argument("corpus: clip too short for flow");
    std::vector<Image> gray;
    gray.reserve(clip.frames.size());
    for (const auto& f : clip.frames) gray.push_back(luma(f));
    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < gray.size(); ++t) {
        const FlowField flow = horn_schunck(FramePair(gray[t], gray[t + 1]), alpha, iters);
        acc += incoherence_score(flow);
    }
    return acc / static_cast<double>(gray.size() - 1);
}

double clip_mean_abs_diff(const VideoClip& clip) {
    if (clip.frames.size() < 2) throw std::invalid_argument("corpus: clip too short");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t + 1 < clip.frames.size(); ++t) {
        const auto& a = clip.frames[t].px;
        const auto& b = clip.frames[t + 1].px;
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(b[i] - a[i]);
        count += a.size();
    }
    return acc / static_cast<double>(count);
}

}  // namespace stfa
