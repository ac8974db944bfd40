#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stfa/detector.hpp"
#include "stfa/errors.hpp"
#include "stfa/flow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stfa;

namespace {

// --seed wins, then STFA_SEED, then zero
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("STFA_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw DataError(std::string("STFA_SEED is not an unsigned integer: ") + env);
        }
    }
    return 0;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("write failed: " + path.string());
}

// every run leaves the resolved configuration next to its outputs
void write_run_json(const fs::path& out_dir, const json& resolved) {
    write_text(out_dir / "run.json", resolved.dump(2) + "\n");
}

fs::path write_summary(const fs::path& out_dir, const std::string& name, const json& body) {
    const fs::path path = out_dir / name;
    write_text(path, body.dump(2) + "\n");
    return path;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

std::pair<int, int> parse_size(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= text.size())
        throw DataError("--size wants HxW, got " + text);
    try {
        return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
    } catch (const std::exception&) {
        throw DataError("--size wants HxW, got " + text);
    }
}

// frame_0000.ppm, frame_0001.ppm, ... until the sequence stops
VideoClip read_clip_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("missing clip directory: " + dir.string());
    VideoClip clip;
    clip.id = dir.filename().string();
    for (int t = 0;; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.ppm", t);
        const fs::path frame = dir / name;
        if (!fs::exists(frame)) break;
        clip.frames.push_back(read_ppm(frame));
    }
    if (clip.frames.empty()) throw DataError("no frames under " + dir.string());
    return clip;
}

// display scaling only; flat maps land mid-gray
Image normalized(const std::vector<double>& data, int h, int w) {
    double lo = data[0], hi = data[0];
    for (double v : data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Image img(h, w);
    const double span = hi - lo;
    for (std::size_t i = 0; i < data.size(); ++i)
        img.px[i] = span > 0.0 ? (data[i] - lo) / span : 0.5;
    return img;
}

json optional_rate(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

struct GenCorpusArgs {
    std::string out;
    CorpusSpec spec;
    std::optional<std::uint64_t> seed;
    std::string size = "32x32";
};

int run_gen_corpus(GenCorpusArgs& a) {
    a.spec.seed = resolve_seed(a.seed);
    std::tie(a.spec.height, a.spec.width) = parse_size(a.size);
    const fs::path out = a.out;
    ensure_dir(out);
    const auto records = generate_corpus(a.spec, out);

    json resolved = {{"command", "gen-corpus"},
                     {"out", out.string()},
                     {"clips_per_class", a.spec.clips_per_class},
                     {"frames", a.spec.frames},
                     {"height", a.spec.height},
                     {"width", a.spec.width},
                     {"motion", a.spec.motion},
                     {"flicker", a.spec.flicker},
                     {"jitter", a.spec.jitter},
                     {"patch", a.spec.patch},
                     {"seed", a.spec.seed}};
    write_run_json(out, resolved);
    json summary = {{"manifest", (out / "manifest.csv").string()},
                    {"clips", records.size()},
                    {"pairs", a.spec.clips_per_class}};
    std::cout << write_summary(out, "summary.json", summary).string() << "\n";
    return 0;
}

struct TrainArgs {
    std::string manifest;
    std::string out;
    ModelConfig mcfg;
    TrainConfig tcfg;
    std::optional<std::uint64_t> seed;
};

int run_train(TrainArgs& a) {
    const std::uint64_t seed = resolve_seed(a.seed);
    a.mcfg.seed = seed;
    a.tcfg.seed = seed;

    auto clips = load_corpus(a.manifest);
    if (clips.empty()) throw DataError("empty corpus: " + a.manifest);
    // the model matches whatever extents the corpus carries
    a.mcfg.input_h = clips[0].frames[0].h;
    a.mcfg.input_w = clips[0].frames[0].w;
    a.mcfg.validate();
    a.tcfg.validate();

    const fs::path out = a.out;
    ensure_dir(out);
    json resolved = {{"command", "train"},
                     {"manifest", a.manifest},
                     {"out", out.string()},
                     {"model", json::parse(model_config_json(a.mcfg))},
                     {"max_epochs", a.tcfg.max_epochs},
                     {"patience", a.tcfg.patience},
                     {"lr", a.tcfg.lr},
                     {"batch", a.tcfg.batch},
                     {"split_ratio", a.tcfg.split_ratio},
                     {"threshold", a.tcfg.threshold},
                     {"frames_per_clip", a.tcfg.frames_per_clip},
                     {"seed", seed}};
    write_run_json(out, resolved);

    auto result = train_detector(clips, a.mcfg, a.tcfg, &std::cerr);

    std::string log_text;
    for (const auto& line : result.log_lines) log_text += line + "\n";
    write_text(out / "train_log.txt", log_text);

    const fs::path ckpt = out / "checkpoint.ckpt";
    save_checkpoint(ckpt, result.params, a.mcfg, result.best_epoch, result.best_val_loss);

    json summary = {{"checkpoint", ckpt.string()},
                    {"log", (out / "train_log.txt").string()},
                    {"best_epoch", result.best_epoch},
                    {"best_val_loss", result.best_val_loss},
                    {"epochs_run", result.log.size()}};
    std::cout << write_summary(out, "summary.json", summary).string() << "\n";
    return 0;
}

struct EvalArgs {
    std::string manifest;
    std::string checkpoint;
    std::string out;
    std::string split = "all";
    double threshold = 0.5;
};

int run_eval(EvalArgs& a) {
    auto loaded = load_checkpoint(a.checkpoint);
    auto clips = load_corpus(a.manifest);
    std::vector<VideoClip> picked;
    for (auto& c : clips)
        if (a.split == "all" || c.split == a.split) picked.push_back(std::move(c));
    if (picked.empty()) throw DataError("no clips with split '" + a.split + "' in " + a.manifest);

    const fs::path out = a.out;
    ensure_dir(out);
    json resolved = {{"command", "eval"},
                     {"manifest", a.manifest},
                     {"checkpoint", a.checkpoint},
                     {"out", out.string()},
                     {"split", a.split},
                     {"threshold", a.threshold},
                     {"model", json::parse(model_config_json(loaded.config))}};
    write_run_json(out, resolved);

    auto r = evaluate_clips(picked, loaded.config, loaded.params, a.threshold);

    std::string csv = "clip_id,label,score\n";
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
        char row[160];
        std::snprintf(row, sizeof row, "%s,%d,%.12e\n", picked[i].id.c_str(), r.labels[i],
                      r.scores[i]);
        csv += row;
    }
    write_text(out / "scores.csv", csv);

    json metrics = {{"clips", picked.size()},
                    {"split", a.split},
                    {"threshold", a.threshold},
                    {"counts",
                     {{"tp", r.cm.tp}, {"fn", r.cm.fn}, {"fp", r.cm.fp}, {"tn", r.cm.tn}}},
                    {"accuracy", optional_rate(r.rates.accuracy)},
                    {"recall", optional_rate(r.rates.recall)},
                    {"tnr", optional_rate(r.rates.tnr)},
                    {"precision", optional_rate(r.rates.precision)},
                    {"auc", r.auc},
                    {"scores", (out / "scores.csv").string()}};
    std::cout << write_summary(out, "metrics.json", metrics).string() << "\n";
    return 0;
}

struct FlowArgs {
    std::string prev;
    std::string next;
    std::string out;
    double alpha = 1.0;
    int iters = 200;
};

int run_flow(FlowArgs& a) {
    FramePair pair(read_gray(a.prev), read_gray(a.next));
    const FlowField flow = horn_schunck(pair, a.alpha, a.iters);

    const fs::path out = a.out;
    ensure_dir(out);
    json resolved = {{"command", "flow"}, {"prev", a.prev},     {"next", a.next},
                     {"out", out.string()}, {"alpha", a.alpha}, {"iters", a.iters}};
    write_run_json(out, resolved);

    write_pgm(out / "flow_u.pgm", normalized(flow.u, flow.h, flow.w));
    write_pgm(out / "flow_v.pgm", normalized(flow.v, flow.h, flow.w));

    double mean_mag = 0.0;
    for (std::size_t i = 0; i < flow.u.size(); ++i)
        mean_mag += std::sqrt(flow.u[i] * flow.u[i] + flow.v[i] * flow.v[i]);
    mean_mag /= static_cast<double>(flow.u.size());

    json summary = {{"mean_magnitude", mean_mag},
                    {"incoherence_score", incoherence_score(flow)},
                    {"flow_u", (out / "flow_u.pgm").string()},
                    {"flow_v", (out / "flow_v.pgm").string()}};
    std::cout << write_summary(out, "flow.json", summary).string() << "\n";
    return 0;
}

struct SliceArgs {
    std::string clip;
    std::string axis = "row";
    int index = 0;
    std::string out;
};

int run_slice(SliceArgs& a) {
    const VideoClip clip = read_clip_dir(a.clip);
    std::vector<Image> gray;
    gray.reserve(clip.frames.size());
    for (const auto& f : clip.frames) gray.push_back(luma(f));
    const SliceAxis axis = a.axis == "row" ? SliceAxis::Row : SliceAxis::Column;
    const Image slice = extract_slice(gray, axis, a.index);

    const fs::path out = a.out;
    ensure_dir(out);
    json resolved = {{"command", "slice"},
                     {"clip", a.clip},
                     {"axis", a.axis},
                     {"index", a.index},
                     {"out", out.string()}};
    write_run_json(out, resolved);
    write_pgm(out / "slice.pgm", slice);

    json summary = {{"slice", (out / "slice.pgm").string()},
                    {"frames", slice.h},
                    {"extent", slice.w},
                    {"roughness", slice_roughness(slice)}};
    std::cout << write_summary(out, "slice.json", summary).string() << "\n";
    return 0;
}

struct AttnVizArgs {
    std::string checkpoint;
    std::string clip;
    int frame = 0;
    std::string out;
    bool temporal = false;
};

int run_attn_viz(AttnVizArgs& a) {
    auto loaded = load_checkpoint(a.checkpoint);
    const VideoClip clip = read_clip_dir(a.clip);
    const FrameFeatures feats = compute_frame_features(clip, a.frame, loaded.config);

    Tape tape;
    DetectorTrace trace;
    const double score =
        detector_forward(tape, feats.frame, feats.residual, loaded.config, loaded.params, &trace)
            ->data[0];

    const fs::path out = a.out;
    ensure_dir(out);
    json resolved = {{"command", "attn-viz"}, {"checkpoint", a.checkpoint},
                     {"clip", a.clip},        {"frame", a.frame},
                     {"out", out.string()},   {"temporal", a.temporal}};
    write_run_json(out, resolved);

    const auto& maps = trace.spatial_maps;
    const int m = maps->shape[0], h = maps->shape[1], w = maps->shape[2];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    json files = json::array();
    for (int i = 0; i < m; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "spatial_%02d.pgm", i);
        std::vector<double> slice(maps->data.begin() + i * plane,
                                  maps->data.begin() + (i + 1) * plane);
        write_pgm(out / name, normalized(slice, h, w));
        files.push_back((out / name).string());
    }

    json summary = {{"score", score}, {"spatial_maps", files}};
    if (a.temporal) {
        json rows = json::array();
        for (int y = 0; y < 3; ++y) {
            json row = json::array();
            for (int x = 0; x < 3; ++x) row.push_back(trace.temporal_map->data[y * 3 + x]);
            rows.push_back(row);
        }
        write_text(out / "temporal.json", json{{"map", rows}}.dump(2) + "\n");

        // 3x3 cells blown up to 32px squares, nearest neighbor
        const int cell = 32;
        Image up(3 * cell, 3 * cell);
        const Image base = normalized(trace.temporal_map->data, 3, 3);
        for (int y = 0; y < up.h; ++y)
            for (int x = 0; x < up.w; ++x) up.at(y, x) = base.at(y / cell, x / cell);
        write_pgm(out / "temporal.pgm", up);

        summary["temporal_json"] = (out / "temporal.json").string();
        summary["temporal_map"] = (out / "temporal.pgm").string();
    }
    std::cout << write_summary(out, "summary.json", summary).string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatio-temporal forgery analysis pipeline"};
    app.require_subcommand(1);

    GenCorpusArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-corpus", "write a synthetic twin-pair corpus");
    gen_cmd->add_option("--out", gen.out, "output directory")->required();
    gen_cmd->add_option("--clips", gen.spec.clips_per_class, "clip pairs per class");
    gen_cmd->add_option("--frames", gen.spec.frames, "frames per clip");
    gen_cmd->add_option("--size", gen.size, "frame extents as HxW");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--motion", gen.spec.motion, "smooth path amplitude, px");
    gen_cmd->add_option("--flicker", gen.spec.flicker, "fake brightness offset bound");
    gen_cmd->add_option("--jitter", gen.spec.jitter, "fake displacement bound, px");
    gen_cmd->add_option("--patch", gen.spec.patch, "tampered square side, 0 disables");

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "fit the detector on a corpus manifest");
    tr_cmd->add_option("--manifest", tr.manifest, "corpus manifest.csv")->required();
    tr_cmd->add_option("--out", tr.out, "output directory")->required();
    tr_cmd->add_option("--epochs", tr.tcfg.max_epochs, "epoch cap");
    tr_cmd->add_option("--patience", tr.tcfg.patience, "early-stop patience");
    tr_cmd->add_option("--lr", tr.tcfg.lr, "learning rate");
    tr_cmd->add_option("--batch", tr.tcfg.batch, "minibatch size");
    tr_cmd->add_option("--split-ratio", tr.tcfg.split_ratio, "train share for untagged corpora");
    tr_cmd->add_option("--threshold", tr.tcfg.threshold, "decision threshold");
    tr_cmd->add_option("--frames-per-clip", tr.tcfg.frames_per_clip, "training frames per clip");
    tr_cmd->add_option("--lookahead", tr.mcfg.lookahead, "motion residual lookahead");
    tr_cmd->add_option("--flow-iters", tr.mcfg.flow_iters, "Horn-Schunck iterations");
    tr_cmd->add_option("--flow-alpha", tr.mcfg.flow_alpha, "Horn-Schunck smoothness");
    tr_cmd->add_flag("--uniform-map", tr.mcfg.temporal.uniform_map,
                     "ablation: uniform temporal attention");
    tr_cmd->add_option("--seed", tr.seed, "training and init seed");

    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "score a corpus against a checkpoint");
    ev_cmd->add_option("--manifest", ev.manifest, "corpus manifest.csv")->required();
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "trained checkpoint")->required();
    ev_cmd->add_option("--out", ev.out, "output directory")->required();
    ev_cmd->add_option("--split", ev.split, "train, val, or all")
        ->check(CLI::IsMember({"train", "val", "all"}));
    ev_cmd->add_option("--threshold", ev.threshold, "decision threshold");

    FlowArgs fl;
    auto* fl_cmd = app.add_subcommand("flow", "optical flow between two frames");
    fl_cmd->add_option("--prev", fl.prev, "earlier frame, PGM or PPM")->required();
    fl_cmd->add_option("--next", fl.next, "later frame, PGM or PPM")->required();
    fl_cmd->add_option("--out", fl.out, "output directory")->required();
    fl_cmd->add_option("--alpha", fl.alpha, "smoothness weight");
    fl_cmd->add_option("--iters", fl.iters, "Jacobi iterations");

    SliceArgs sl;
    auto* sl_cmd = app.add_subcommand("slice", "stack one row or column across frames");
    sl_cmd->add_option("--clip", sl.clip, "clip directory of PPM frames")->required();
    sl_cmd->add_option("--axis", sl.axis, "row or column")
        ->check(CLI::IsMember({"row", "column"}));
    sl_cmd->add_option("--index", sl.index, "row or column index");
    sl_cmd->add_option("--out", sl.out, "output directory")->required();

    AttnVizArgs av;
    auto* av_cmd = app.add_subcommand("attn-viz", "dump attention maps for one frame");
    av_cmd->add_option("--checkpoint", av.checkpoint, "trained checkpoint")->required();
    av_cmd->add_option("--clip", av.clip, "clip directory of PPM frames")->required();
    av_cmd->add_option("--frame", av.frame, "frame index");
    av_cmd->add_option("--out", av.out, "output directory")->required();
    av_cmd->add_flag("--temporal", av.temporal, "also dump the 3x3 temporal map");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (gen_cmd->parsed()) return run_gen_corpus(gen);
        if (tr_cmd->parsed()) return run_train(tr);
        if (ev_cmd->parsed()) return run_eval(ev);
        if (fl_cmd->parsed()) return run_flow(fl);
        if (sl_cmd->parsed()) return run_slice(sl);
        if (av_cmd->parsed()) return run_attn_viz(av);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
