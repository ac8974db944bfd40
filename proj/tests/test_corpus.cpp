#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "stfa/corpus.hpp"
#include "stfa/errors.hpp"
#include "stfa/flow.hpp"
#include "stfa/metrics.hpp"

using namespace stfa;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CorpusSpec small_spec() {
    CorpusSpec spec;
    spec.clips_per_class = 4;
    return spec;
}

VideoClip make_pair(const CorpusSpec& spec, std::uint64_t i, VideoClip* fake_out) {
    Rng scene_rng(derive_seed(spec.seed, 2 * i));
    Rng artifact_rng(derive_seed(spec.seed, 2 * i + 1));
    VideoClip real = generate_real_clip(spec, scene_rng);
    if (fake_out) *fake_out = generate_fake_clip(real, spec, artifact_rng);
    return real;
}

}  // namespace

TEST_CASE("spec validation") {
    CorpusSpec spec;
    Rng rng(1);
    spec.clips_per_class = 0;
    CHECK_THROWS_AS(generate_real_clip(spec, rng), std::invalid_argument);
    spec = CorpusSpec{};
    spec.frames = 2;
    CHECK_THROWS_AS(generate_real_clip(spec, rng), std::invalid_argument);
    spec = CorpusSpec{};
    spec.width = 4;
    CHECK_THROWS_AS(generate_real_clip(spec, rng), std::invalid_argument);
    spec = CorpusSpec{};
    spec.flicker = -0.1;
    CHECK_THROWS_AS(generate_real_clip(spec, rng), std::invalid_argument);
    spec = CorpusSpec{};
    spec.patch = 40;
    CHECK_THROWS_AS(generate_real_clip(spec, rng), std::invalid_argument);
}

TEST_CASE("real clip shape and range") {
    CorpusSpec spec;
    spec.frames = 5;
    spec.height = 24;
    spec.width = 20;
    Rng rng(3);
    const auto clip = generate_real_clip(spec, rng);
    CHECK(clip.label == 0);
    REQUIRE(clip.frames.size() == 5);
    for (const auto& f : clip.frames) {
        CHECK(f.h == 24);
        CHECK(f.w == 20);
        for (double v : f.px) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("zero motion freezes the scene") {
    CorpusSpec spec;
    spec.motion = 0.0;
    Rng rng(9);
    const auto clip = generate_real_clip(spec, rng);
    for (std::size_t t = 1; t < clip.frames.size(); ++t)
        CHECK(clip.frames[t].px == clip.frames[0].px);
}

TEST_CASE("zero amplitudes make the fake a bit-exact twin") {
    CorpusSpec spec;
    spec.flicker = 0.0;
    spec.jitter = 0.0;
    spec.patch = 0;
    VideoClip fake;
    const auto real = make_pair(spec, 11, &fake);
    REQUIRE(fake.frames.size() == real.frames.size());
    CHECK(fake.label == 1);
    for (std::size_t t = 0; t < real.frames.size(); ++t)
        CHECK(fake.frames[t].px == real.frames[t].px);
}

TEST_CASE("generation is deterministic under seed") {
    const CorpusSpec spec;
    VideoClip fake_a, fake_b;
    const auto real_a = make_pair(spec, 5, &fake_a);
    const auto real_b = make_pair(spec, 5, &fake_b);
    for (std::size_t t = 0; t < real_a.frames.size(); ++t) {
        CHECK(real_a.frames[t].px == real_b.frames[t].px);
        CHECK(fake_a.frames[t].px == fake_b.frames[t].px);
    }
}

TEST_CASE("fakes move more than their twins") {
    const CorpusSpec spec;
    int wins = 0;
    const int n = 60;
    for (int i = 0; i < n; ++i) {
        VideoClip fake;
        const auto real = make_pair(spec, static_cast<std::uint64_t>(i), &fake);
        if (clip_mean_abs_diff(real) < clip_mean_abs_diff(fake)) ++wins;
    }
    CHECK(wins >= 57);  // 95% of pairs
}

TEST_CASE("jitter alone roughens the temporal slice") {
    CorpusSpec spec;
    spec.flicker = 0.0;
    spec.patch = 0;
    spec.jitter = 2.0;
    for (int i = 0; i < 25; ++i) {
        VideoClip fake;
        const auto real = make_pair(spec, static_cast<std::uint64_t>(i), &fake);
        std::vector<Image> rg, fg;
        for (const auto& f : real.frames) rg.push_back(luma(f));
        for (const auto& f : fake.frames) fg.push_back(luma(f));
        const double rr = slice_roughness(extract_slice(rg, SliceAxis::Row, spec.height / 2));
        const double fr = slice_roughness(extract_slice(fg, SliceAxis::Row, spec.height / 2));
        CHECK(fr > rr);
    }
}

TEST_CASE("flow incoherence separates the classes") {
    // fewer clips and iterations than the shipped defaults, enough for the
    // distribution check without dominating suite runtime
    const CorpusSpec spec;
    std::vector<double> scores;
    std::vector<int> labels;
    int wins = 0;
    const int n = 25;
    for (int i = 0; i < n; ++i) {
        VideoClip fake;
        const auto real = make_pair(spec, static_cast<std::uint64_t>(i), &fake);
        const double ri = clip_incoherence(real, 1.0, 60);
        const double fi = clip_incoherence(fake, 1.0, 60);
        if (fi > ri) ++wins;
        scores.push_back(ri);
        labels.push_back(0);
        scores.push_back(fi);
        labels.push_back(1);
    }
    CHECK(wins >= 23);  // 90% of pairs
    CHECK(auc(scores, labels) > 0.8);
}

TEST_CASE("pair split counting") {
    const auto tags = assign_pair_splits(50, 0.8, 123);
    int train = 0, val = 0;
    for (const auto& t : tags) {
        if (t == "train")
            ++train;
        else if (t == "val")
            ++val;
        else
            FAIL("unexpected tag");
    }
    // 100 clips worth of pairs: exactly 80 train / 20 val clips
    CHECK(train == 40);
    CHECK(val == 10);

    CHECK(assign_pair_splits(50, 0.8, 123) == tags);
    CHECK(assign_pair_splits(5, 0.0, 1) == std::vector<std::string>(5, "val"));
    CHECK(assign_pair_splits(5, 1.0, 1) == std::vector<std::string>(5, "train"));
    CHECK_THROWS_AS(assign_pair_splits(0, 0.8, 1), std::invalid_argument);
    CHECK_THROWS_AS(assign_pair_splits(5, 1.5, 1), std::invalid_argument);
}

TEST_CASE("manifest round trip") {
    const auto dir = fresh_dir("stfa_manifest_rt");
    std::vector<ClipRecord> records = {
        {"real_0000", 0, "train", 0},
        {"fake_0000", 1, "train", 0},
        {"real_0001", 0, "val", 0},
    };
    write_manifest(dir / "manifest.csv", records);
    const auto loaded = load_manifest(dir / "manifest.csv");
    REQUIRE(loaded.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded[i].dir == records[i].dir);
        CHECK(loaded[i].label == records[i].label);
        CHECK(loaded[i].split == records[i].split);
        CHECK(loaded[i].line == static_cast<int>(i) + 2);
    }
}

TEST_CASE("manifest rejects malformed rows with their line numbers") {
    const auto dir = fresh_dir("stfa_manifest_bad");
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::binary);
        out << body;
        return dir / name;
    };

    const auto bad_label = write("label.csv", "clip_dir,label,split\nreal_0000,0,train\nx,2,val\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_manifest(bad_label)),
                         doctest::Contains("line 3"), DataError);
    const auto bad_split = write("split.csv", "clip_dir,label,split\nx,0,test\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_manifest(bad_split)),
                         doctest::Contains("line 2"), DataError);
    const auto bad_fields = write("fields.csv", "clip_dir,label,split\nx,0\n");
    CHECK_THROWS_AS(static_cast<void>(load_manifest(bad_fields)), DataError);
    const auto bad_header = write("header.csv", "dir,label\nx,0,train\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_manifest(bad_header)),
                         doctest::Contains("header"), DataError);
    const auto empty = write("empty.csv", "");
    CHECK_THROWS_AS(static_cast<void>(load_manifest(empty)), DataError);
    CHECK_THROWS_AS(static_cast<void>(load_manifest(dir / "absent.csv")), DataError);
}

TEST_CASE("clip loading rejects broken directories") {
    const auto dir = fresh_dir("stfa_clip_bad");

    ClipRecord missing{"nope", 0, "train", 4};
    CHECK_THROWS_WITH_AS(static_cast<void>(load_clip(dir, missing)), doctest::Contains("line 4"),
                         DataError);

    fs::create_directories(dir / "empty");
    ClipRecord empty{"empty", 0, "train", 5};
    CHECK_THROWS_WITH_AS(static_cast<void>(load_clip(dir, empty)), doctest::Contains("no frames"),
                         DataError);

    fs::create_directories(dir / "short");
    ColorImage frame(8, 8, 0.5);
    write_ppm(dir / "short" / "frame_0000.ppm", frame);
    write_ppm(dir / "short" / "frame_0001.ppm", frame);
    ClipRecord two{"short", 0, "train", 6};
    CHECK_THROWS_WITH_AS(static_cast<void>(load_clip(dir, two)), doctest::Contains("at least 3"),
                         DataError);

    fs::create_directories(dir / "ragged");
    write_ppm(dir / "ragged" / "frame_0000.ppm", frame);
    write_ppm(dir / "ragged" / "frame_0001.ppm", frame);
    write_ppm(dir / "ragged" / "frame_0002.ppm", ColorImage(8, 10, 0.5));
    ClipRecord ragged{"ragged", 0, "train", 7};
    CHECK_THROWS_WITH_AS(static_cast<void>(load_clip(dir, ragged)),
                         doctest::Contains("extents differ"), DataError);
}

TEST_CASE("generated corpus lands on disk and loads back") {
    const auto dir = fresh_dir("stfa_corpus_disk");
    auto spec = small_spec();
    const auto records = generate_corpus(spec, dir);
    REQUIRE(records.size() == 8);
    CHECK(fs::exists(dir / "manifest.csv"));

    const auto clips = load_corpus(dir / "manifest.csv");
    REQUIRE(clips.size() == 8);
    int train = 0, val = 0, fakes = 0;
    for (const auto& c : clips) {
        CHECK(c.frames.size() == static_cast<std::size_t>(spec.frames));
        fakes += c.label;
        (c.split == "train" ? train : val) += 1;
    }
    CHECK(fakes == 4);
    // 4 pairs at 0.8: round(3.2) = 3 pairs train
    CHECK(train == 6);
    CHECK(val == 2);

    // twins share a split
    const auto recs = load_manifest(dir / "manifest.csv");
    for (std::size_t i = 0; i + 1 < recs.size(); i += 2) CHECK(recs[i].split == recs[i + 1].split);
}

TEST_CASE("regeneration is byte-identical") {
    const auto a = fresh_dir("stfa_corpus_regen_a");
    const auto b = fresh_dir("stfa_corpus_regen_b");
    auto spec = small_spec();
    spec.clips_per_class = 2;
    generate_corpus(spec, a);
    generate_corpus(spec, b);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        REQUIRE(in.good());
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(a / "manifest.csv") == slurp(b / "manifest.csv"));
    for (const auto& rec : load_manifest(a / "manifest.csv"))
        for (int t = 0; t < spec.frames; ++t) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%04d.ppm", t);
            CHECK(slurp(a / rec.dir / name) == slurp(b / rec.dir / name));
        }
}
