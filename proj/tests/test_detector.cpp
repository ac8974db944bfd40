#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stfa/detector.hpp"
#include "stfa/errors.hpp"

using namespace stfa;
namespace fs = std::filesystem;

namespace {

// Reduced extents keep the forward cheap enough for gradient sweeps and
// multi-epoch training inside a unit test.
ModelConfig small_config(std::uint64_t seed = 7) {
    ModelConfig g;
    g.input_h = 16;
    g.input_w = 16;
    g.dense = {.layers = 2, .growth = 4, .in_channels = 3};
    g.attention_maps = 2;
    g.blocks = {{8, 2}, {12, 2}};
    g.temporal.conv_channels = 4;
    g.temporal.embed_dim = 16;
    g.flow_iters = 20;
    g.seed = seed;
    return g;
}

std::vector<VideoClip> tiny_corpus(int pairs, std::uint64_t seed) {
    CorpusSpec cs;
    cs.clips_per_class = pairs;
    cs.frames = 5;
    cs.height = 16;
    cs.width = 16;
    cs.seed = seed;
    std::vector<VideoClip> clips;
    for (int i = 0; i < pairs; ++i) {
        Rng scene(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(i)), 0));
        Rng artifacts(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(i)), 1));
        VideoClip real = generate_real_clip(cs, scene);
        real.id = "real_" + std::to_string(i);
        VideoClip fake = generate_fake_clip(real, cs, artifacts);
        fake.label = 1;
        fake.id = "fake_" + std::to_string(i);
        clips.push_back(std::move(real));
        clips.push_back(std::move(fake));
    }
    return clips;
}

void zero_fuse(DetectorParams& p) {
    for (auto& v : p.fuse_weight->data) v = 0.0;
    for (auto& v : p.fuse_bias->data) v = 0.0;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t read_u32(const std::string& b, std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

void write_u32(std::string& b, std::size_t at, std::uint32_t v) {
    b[at] = static_cast<char>(v & 0xff);
    b[at + 1] = static_cast<char>((v >> 8) & 0xff);
    b[at + 2] = static_cast<char>((v >> 16) & 0xff);
    b[at + 3] = static_cast<char>((v >> 24) & 0xff);
}

// start of the entry whose path field equals `path` (length prefix included)
std::size_t entry_offset(const std::string& bytes, const std::string& path) {
    std::string needle;
    needle.push_back(static_cast<char>(path.size() & 0xff));
    needle.push_back(static_cast<char>(path.size() >> 8));
    needle += path;
    const auto at = bytes.find(needle);
    REQUIRE(at != std::string::npos);
    return at;
}

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "stfa_detector_test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("model config validation") {
    CHECK(ModelConfig{}.fusion_width() == 104);
    CHECK_NOTHROW(ModelConfig{}.validate());
    CHECK_NOTHROW(small_config().validate());

    auto cfg = small_config();
    cfg.input_h = 2;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("input extents"), std::invalid_argument);

    cfg = small_config();
    cfg.blocks[1].stride = 3;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("stride must be 1 or 2"),
                         std::invalid_argument);

    cfg = small_config();
    cfg.input_h = cfg.input_w = 18;  // 18 -> 9, second halving impossible
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("cannot halve 9x9"),
                         std::invalid_argument);

    cfg = small_config();
    cfg.blocks.clear();
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("at least one block"),
                         std::invalid_argument);

    cfg = small_config();
    cfg.attention_maps = 0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("spatial map"), std::invalid_argument);

    cfg = small_config();
    cfg.temporal.residual_channels = 3;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("two-channel"), std::invalid_argument);

    cfg = small_config();
    cfg.lookahead = 0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("lookahead"), std::invalid_argument);

    TrainConfig tc;
    tc.split_ratio = 1.0;
    CHECK_THROWS_WITH_AS(tc.validate(), doctest::Contains("split ratio"), std::invalid_argument);
    tc = TrainConfig{};
    tc.patience = 0;
    CHECK_THROWS_WITH_AS(tc.validate(), doctest::Contains("patience"), std::invalid_argument);
}

TEST_CASE("parameter init is seed-deterministic") {
    auto cfg = small_config(21);
    auto a = init_detector(cfg);
    auto b = init_detector(cfg);
    auto an = a.named(), bn = b.named();
    REQUIRE(an.size() == bn.size());
    for (std::size_t i = 0; i < an.size(); ++i) {
        CHECK(an[i].first == bn[i].first);
        CHECK(an[i].second->data == bn[i].second->data);
    }

    cfg.seed = 22;
    auto c = init_detector(cfg);
    bool differs = false;
    for (std::size_t i = 0; i < c.fuse_weight->data.size(); ++i)
        differs = differs || c.fuse_weight->data[i] != a.fuse_weight->data[i];
    CHECK(differs);

    CHECK(an.front().first == "dense/layer0/kernel");
    CHECK(an.back().first == "fuse/bias");
    bool has_block = false, has_temporal = false;
    for (const auto& [name, t] : an) {
        has_block = has_block || name == "block1/skip";
        has_temporal = has_temporal || name == "temporal/template";
    }
    CHECK(has_block);
    CHECK(has_temporal);

    for (const auto& v : a.blocks[0].bias1->data) CHECK(v == 0.0);
    CHECK(a.fuse_bias->data == std::vector<double>{0.0});
}

TEST_CASE("zeroed fusion layer pins the score at one half") {
    auto cfg = small_config();
    auto params = init_detector(cfg);
    zero_fuse(params);
    Rng rng(404);
    auto frame = rand_uniform({3, 16, 16}, rng, 0.0, 1.0);
    auto residual = rand_uniform({2, 16, 16}, rng, 0.0, 0.3);

    Tape tape;
    DetectorTrace trace;
    auto score = detector_forward(tape, frame, residual, cfg, params, &trace);
    CHECK(score->shape == Shape{1});
    CHECK(score->data[0] == 0.5);

    CHECK(trace.spatial_maps->shape == Shape{2, 16, 16});
    CHECK(trace.temporal_map->shape == Shape{3, 3});
    double map_sum = 0.0;
    for (double v : trace.temporal_map->data) {
        CHECK(v > 0.0);
        map_sum += v;
    }
    CHECK(map_sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forward is deterministic and bounded") {
    auto cfg = small_config();
    auto params = init_detector(cfg);
    Rng rng(405);
    auto frame = rand_uniform({3, 16, 16}, rng, 0.0, 1.0);
    auto residual = rand_uniform({2, 16, 16}, rng, 0.0, 0.3);

    Tape t1, t2;
    auto s1 = detector_forward(t1, frame, residual, cfg, params);
    auto s2 = detector_forward(t2, frame, residual, cfg, params);
    CHECK(s1->data[0] == s2->data[0]);
    CHECK(s1->data[0] > 0.0);
    CHECK(s1->data[0] < 1.0);
}

TEST_CASE("forward rejects mis-shaped stages") {
    auto cfg = small_config();
    auto params = init_detector(cfg);
    Rng rng(406);
    auto frame = rand_uniform({3, 16, 16}, rng, 0.0, 1.0);
    auto residual = rand_uniform({2, 16, 16}, rng, 0.0, 0.3);

    Tape tape;
    auto bad_frame = rand_uniform({3, 8, 8}, rng, 0.0, 1.0);
    CHECK_THROWS_WITH_AS(detector_forward(tape, bad_frame, residual, cfg, params),
                         doctest::Contains("detector/frame"), std::invalid_argument);
    auto bad_residual = rand_uniform({1, 16, 16}, rng, 0.0, 1.0);
    CHECK_THROWS_WITH_AS(detector_forward(tape, frame, bad_residual, cfg, params),
                         doctest::Contains("detector/residual"), std::invalid_argument);

    auto wide = cfg;
    wide.blocks.push_back({16, 1});
    CHECK_THROWS_WITH_AS(detector_forward(tape, frame, residual, wide, params),
                         doctest::Contains("detector/backbone"), std::invalid_argument);
}

TEST_CASE("residual blocks halve extents and carry the skip path") {
    Tape tape;
    Rng rng(31);
    auto cfg = small_config();
    auto params = init_detector(cfg);
    const int cin = cfg.dense.out_channels();
    auto x = rand_uniform({cin, 16, 16}, rng, 0.0, 1.0);

    auto halved = residual_block_forward(tape, x, cfg.blocks[0], params.blocks[0]);
    CHECK(halved->shape == Shape{8, 8, 8});

    ResidualBlockSpec same{8, 1};
    auto y = rand_uniform({cin, 16, 16}, rng, 0.0, 1.0);
    CHECK(residual_block_forward(tape, y, cfg.blocks[0] /*params reuse*/, params.blocks[0])
              ->shape == Shape{8, 8, 8});

    // zero parameters kill both branches
    ResidualBlockParams z;
    z.conv1 = zeros({1, 1, 3, 3});
    z.bias1 = zeros({1});
    z.conv2 = zeros({1, 1, 3, 3});
    z.bias2 = zeros({1});
    z.skip = zeros({1, 1, 1, 1});
    z.skip_bias = zeros({1});
    auto dead = residual_block_forward(tape, rand_uniform({1, 4, 4}, rng, 0.0, 1.0), same, z);
    for (double v : dead->data) CHECK(v == 0.0);

    // only the skip path live: relu(2 * avg_pool(ones)) everywhere
    z.skip = tensor({1, 1, 1, 1}, {2.0});
    auto ones = tensor({1, 4, 4}, std::vector<double>(16, 1.0));
    auto skipped = residual_block_forward(tape, ones, ResidualBlockSpec{1, 2}, z);
    CHECK(skipped->shape == Shape{1, 2, 2});
    for (double v : skipped->data) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("frame tensors are planar") {
    ColorImage img(2, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.1 * (c + 1) + 0.01 * (y * 2 + x);
    auto t = frame_tensor(img);
    REQUIRE(t->shape == Shape{3, 2, 2});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                CHECK(t->data[static_cast<std::size_t>(c) * 4 + y * 2 + x] ==
                      doctest::Approx(0.1 * (c + 1) + 0.01 * (y * 2 + x)).epsilon(1e-15));

    CHECK_THROWS_AS(frame_tensor(ColorImage{}), std::invalid_argument);
}

TEST_CASE("frame features carry averaged motion residuals") {
    auto cfg = small_config();
    auto clips = tiny_corpus(1, 11);
    const auto& clip = clips[0];
    CHECK(usable_frames(clip, cfg) == 3);

    auto f = compute_frame_features(clip, 0, cfg);
    CHECK(f.frame->shape == Shape{3, 16, 16});
    CHECK(f.residual->shape == Shape{2, 16, 16});

    // static content: zero frame deltas, zero flow, zero residual
    VideoClip flat;
    flat.frames.assign(4, ColorImage(16, 16, 0.5));
    auto g = compute_frame_features(flat, 0, cfg);
    for (double v : g.residual->data) CHECK(v == 0.0);
    for (double v : g.frame->data) CHECK(v == 0.5);

    CHECK_THROWS_WITH_AS(compute_frame_features(clip, 3, cfg), doctest::Contains("lacks"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(compute_frame_features(clip, -1, cfg), doctest::Contains("lacks"),
                         std::invalid_argument);
}

TEST_CASE("clip prediction averages usable frames") {
    auto cfg = small_config();
    auto params = init_detector(cfg);
    auto clips = tiny_corpus(1, 12);

    VideoClip two;
    two.frames.assign(2, ColorImage(16, 16, 0.5));
    CHECK_THROWS_WITH_AS(predict_clip(two, cfg, params), doctest::Contains("needs at least 3"),
                         std::invalid_argument);

    // exactly one usable frame: the clip score is that frame's score
    VideoClip three = clips[0];
    three.frames.resize(3);
    const double clip_score = predict_clip(three, cfg, params);
    const double frame_score = predict_frame(cfg, params, compute_frame_features(three, 0, cfg));
    CHECK(clip_score == frame_score);
    CHECK(clip_score > 0.0);
    CHECK(clip_score < 1.0);
}

TEST_CASE("full forward pass against central differences") {
    // Central differences on the assembled graph walk a narrow numeric
    // corridor: large eps straddles relu kinks (the window scales with how
    // many preactivations one coordinate feeds), small eps loses diluted
    // gradients to cancellation in fp - fm. At these extents eps 1e-4 clears
    // both; the seeds are fixed away from kink straddles, which no eps
    // removes. Native-extent sweeps live in the acceptance battery.
    for (std::uint64_t seed : {1ull, 2ull}) {
        auto cfg = small_config(seed);
        auto params = init_detector(cfg);
        Rng rng(derive_seed(0xD00D, seed));
        auto frame = rand_uniform({3, 16, 16}, rng, 0.05, 0.95);
        auto residual = rand_uniform({2, 16, 16}, rng, 0.01, 0.2);
        std::vector<TensorPtr> inputs = {frame,
                                         residual,
                                         params.dense.kernels[0],
                                         params.spatial.kernel,
                                         params.blocks[0].conv1,
                                         params.blocks[1].skip,
                                         params.temporal.proj_weight,
                                         params.temporal.fake_template,
                                         params.fuse_weight,
                                         params.fuse_bias};
        auto fn = [&](Tape& t, const std::vector<TensorPtr>&) {
            return detector_forward(t, frame, residual, cfg, params);
        };
        auto report = grad_check("detector", fn, inputs, 1e-4);
        CAPTURE(seed);
        CAPTURE(report.max_rel_err);
        CHECK(report.pass);
    }
}

TEST_CASE("training smoke on an untagged corpus") {
    auto cfg = small_config(3);
    auto clips = tiny_corpus(2, 13);
    TrainConfig tc;
    tc.max_epochs = 8;
    tc.patience = 8;
    tc.lr = 0.1;
    tc.seed = 9;

    std::ostringstream stream;
    auto res = train_detector(clips, cfg, tc, &stream);
    REQUIRE(!res.log_lines.empty());
    CHECK(res.log_lines.front() ==
          "training 6 frame examples from 3 clips (1 val), batch 16, lr 0.1");
    CHECK(res.log.size() <= 8);
    CHECK(res.log_lines.size() == res.log.size() + 2);
    CHECK(res.best_epoch >= 1);
    CHECK(std::isfinite(res.best_val_loss));

    std::string joined;
    for (const auto& line : res.log_lines) joined += line + "\n";
    CHECK(stream.str() == joined);

    auto rerun = train_detector(clips, cfg, tc);
    CHECK(rerun.log_lines == res.log_lines);
}

TEST_CASE("training learns a twin pair apart") {
    auto cfg = small_config(7);
    CorpusSpec cs;
    cs.clips_per_class = 1;
    cs.frames = 5;
    cs.height = 16;
    cs.width = 16;
    cs.seed = 3;
    Rng scene(derive_seed(cs.seed, 0));
    Rng artifacts(derive_seed(cs.seed, 1));
    VideoClip real = generate_real_clip(cs, scene);
    real.id = "real_0";
    VideoClip fake = generate_fake_clip(real, cs, artifacts);
    fake.label = 1;
    fake.id = "fake_0";
    std::vector<VideoClip> clips = {real, fake};

    TrainConfig tc;
    tc.max_epochs = 30;
    tc.patience = 30;
    tc.lr = 0.1;
    tc.seed = 5;
    auto res = train_detector(clips, cfg, tc);

    // both clips land in train, validation falls back to them
    CHECK(res.log_lines.front().find("from 2 clips (2 val)") != std::string::npos);
    REQUIRE(res.log.size() >= 5);
    for (std::size_t i = 1; i < 5; ++i)
        CHECK(res.log[i].train_loss < res.log[i - 1].train_loss);

    CHECK(predict_clip(fake, cfg, res.params) > predict_clip(real, cfg, res.params));
}

TEST_CASE("patience stops stale training") {
    auto cfg = small_config(4);
    auto clips = tiny_corpus(1, 14);
    TrainConfig tc;
    tc.max_epochs = 20;
    tc.patience = 1;
    tc.lr = 0.0;  // parameters frozen, epoch 2 cannot improve
    auto res = train_detector(clips, cfg, tc);
    CHECK(res.log.size() == 2);
    CHECK(res.log[0].improved);
    CHECK(!res.log[1].improved);
    CHECK(res.best_epoch == 1);
    CHECK(res.log_lines.size() == 4);
}

TEST_CASE("training input validation") {
    auto cfg = small_config(5);
    TrainConfig tc;
    CHECK_THROWS_WITH_AS(train_detector({}, cfg, tc), doctest::Contains("empty corpus"),
                         std::invalid_argument);

    auto clips = tiny_corpus(1, 15);
    clips[0].split = "train";
    CHECK_THROWS_WITH_AS(train_detector(clips, cfg, tc),
                         doctest::Contains("mixes tagged and untagged"), std::invalid_argument);

    clips[1].split = "train";
    clips[0].label = 1;  // both fake now
    CHECK_THROWS_WITH_AS(train_detector(clips, cfg, tc),
                         doctest::Contains("single-class training split (2 fake / 0 real)"),
                         std::invalid_argument);

    auto short_clips = tiny_corpus(1, 16);
    short_clips[0].frames.resize(2);
    CHECK_THROWS_WITH_AS(train_detector(short_clips, cfg, tc), doctest::Contains("needs at least"),
                         std::invalid_argument);

    auto ok = tiny_corpus(1, 17);
    auto poisoned = init_detector(cfg);
    poisoned.fuse_weight->data[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig fast;
    fast.max_epochs = 1;
    CHECK_THROWS_WITH_AS(train_detector(ok, cfg, fast, nullptr, &poisoned),
                         doctest::Contains("non-finite loss at epoch 1"), NumericError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    auto dir = temp_dir();
    auto cfg = small_config(8);
    auto params = init_detector(cfg);
    params.fuse_weight->data[3] = 0.123456789012345;

    auto path = dir / "round_trip.ckpt";
    save_checkpoint(path, params, cfg, 17, 0.0625);
    auto loaded = load_checkpoint(path);

    CHECK(loaded.epoch == 17);
    CHECK(loaded.best_val_loss == 0.0625);
    CHECK(model_config_json(loaded.config) == model_config_json(cfg));

    auto an = params.named();
    auto bn = loaded.params.named();
    REQUIRE(an.size() == bn.size());
    for (std::size_t i = 0; i < an.size(); ++i) {
        CHECK(an[i].first == bn[i].first);
        CHECK(an[i].second->data == bn[i].second->data);
    }

    Rng rng(42);
    auto frame = rand_uniform({3, 16, 16}, rng, 0.0, 1.0);
    auto residual = rand_uniform({2, 16, 16}, rng, 0.0, 0.3);
    Tape t1, t2;
    CHECK(detector_forward(t1, frame, residual, cfg, params)->data[0] ==
          detector_forward(t2, frame, residual, loaded.config, loaded.params)->data[0]);

    auto again = dir / "round_trip_2.ckpt";
    save_checkpoint(again, params, cfg, 17, 0.0625);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("checkpoint surgery is detected") {
    auto dir = temp_dir();
    auto cfg = small_config(9);
    auto params = init_detector(cfg);
    auto path = dir / "donor.ckpt";
    save_checkpoint(path, params, cfg, 3, 0.5);
    const std::string bytes = slurp(path);
    REQUIRE(bytes.size() > 12);
    REQUIRE(bytes.substr(0, 4) == "STFA");

    {
        // cut the fuse/bias entry: len u16 + 9-char path + rank + 2 extents + 1 payload
        std::string cut = bytes;
        const auto at = entry_offset(cut, "fuse/bias");
        cut.erase(at, 2 + 9 + 1 + 8 + 8);
        write_u32(cut, 8, read_u32(cut, 8) - 1);
        auto p = dir / "cut.ckpt";
        spit(p, cut);
        CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("missing [fuse/bias]"),
                             DataError);
    }
    {
        // splice in an entry no config asks for
        std::string extra = bytes;
        const std::string name = "spare/knob";
        extra.push_back(static_cast<char>(name.size()));
        extra.push_back(0);
        extra += name;
        extra.push_back(1);                       // rank
        extra += std::string("\x01\x00\x00\x00", 4);  // extents {1}
        extra += std::string(8, '\0');            // one double
        write_u32(extra, 8, read_u32(extra, 8) + 1);
        auto p = dir / "extra.ckpt";
        spit(p, extra);
        CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("unexpected [spare/knob]"),
                             DataError);
    }
    {
        // shrink the template entry to [8]: patch its extent, drop 8 doubles
        std::string shrunk = bytes;
        const auto at = entry_offset(shrunk, "temporal/template");
        const auto extents_at = at + 2 + 17 + 1;
        REQUIRE(read_u32(shrunk, extents_at) == 16);
        write_u32(shrunk, extents_at, 8);
        shrunk.erase(extents_at + 4, 8 * 8);
        auto p = dir / "shrunk.ckpt";
        spit(p, shrunk);
        CHECK_THROWS_WITH_AS(load_checkpoint(p),
                             doctest::Contains("mismatched [temporal/template ([8] vs [16])]"),
                             DataError);
    }
    {
        auto p = dir / "stub.ckpt";
        spit(p, bytes.substr(0, 10));
        CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("truncated"), DataError);
    }
    {
        std::string wrong = bytes;
        wrong[0] = 'X';
        auto p = dir / "magic.ckpt";
        spit(p, wrong);
        CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("bad magic"), DataError);
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "absent.ckpt"), doctest::Contains("cannot open"),
                         DataError);
}

TEST_CASE("model config json round-trips") {
    auto cfg = small_config(10);
    cfg.temporal.uniform_map = true;
    const auto text = model_config_json(cfg);
    auto back = model_config_from_json(text);
    CHECK(model_config_json(back) == text);
    CHECK(back.blocks.size() == cfg.blocks.size());
    CHECK(back.temporal.uniform_map);
    CHECK(back.seed == cfg.seed);

    CHECK_THROWS_WITH_AS(model_config_from_json("{}"), doctest::Contains("model config json"),
                         DataError);
    CHECK_THROWS_WITH_AS(model_config_from_json("not json"), doctest::Contains("model config json"),
                         DataError);
}

TEST_CASE("zero-fused evaluation predicts everything positive") {
    auto cfg = small_config(6);
    auto params = init_detector(cfg);
    zero_fuse(params);
    auto clips = tiny_corpus(2, 18);

    auto r = evaluate_clips(clips, cfg, params, 0.5);
    REQUIRE(r.scores.size() == 4);
    for (double s : r.scores) CHECK(s == 0.5);
    CHECK(r.cm.tp == 2);
    CHECK(r.cm.fp == 2);
    CHECK(r.cm.fn == 0);
    CHECK(r.cm.tn == 0);
    CHECK(r.auc == 0.5);
    REQUIRE(r.rates.accuracy.has_value());
    CHECK(*r.rates.accuracy == 0.5);
}
