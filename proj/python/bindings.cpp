#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "stfa/corpus.hpp"
#include "stfa/detector.hpp"
#include "stfa/errors.hpp"
#include "stfa/flow.hpp"
#include "stfa/metrics.hpp"

namespace py = pybind11;
using namespace stfa;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image image_from_array(const Array& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array, got " +
                                                   std::to_string(a.ndim()) + " dims");
    Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), img.px.begin());
    return img;
}

Array array_from_image(const Image& img) {
    Array a({img.h, img.w});
    std::copy(img.px.begin(), img.px.end(), a.mutable_data());
    return a;
}

Array array_from_frame(const ColorImage& img) {
    Array a({img.h, img.w, 3});
    std::copy(img.px.begin(), img.px.end(), a.mutable_data());
    return a;
}

// trained model handle: config plus parameters, save/load round-trips the
// checkpoint format
struct Detector {
    ModelConfig config;
    DetectorParams params;
    int epoch = 0;
    double best_val_loss = 0.0;
};

struct TrainOutcome {
    std::shared_ptr<Detector> detector;
    std::vector<std::string> log_lines;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

py::dict confusion_dict(const ConfusionMatrix& cm) {
    py::dict d;
    d["tp"] = cm.tp;
    d["fn"] = cm.fn;
    d["fp"] = cm.fp;
    d["tn"] = cm.tn;
    return d;
}

py::object rate(const std::optional<double>& v) {
    return v ? py::cast(*v) : py::none();
}

}  // namespace

PYBIND11_MODULE(_stfa, m) {
    m.doc() = "spatio-temporal forgery analysis pipeline";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<CorpusSpec>(m, "CorpusSpec")
        .def(py::init([](int clips_per_class, int frames, int height, int width, double motion,
                         double flicker, double jitter, int patch, std::uint64_t seed) {
                 CorpusSpec s;
                 s.clips_per_class = clips_per_class;
                 s.frames = frames;
                 s.height = height;
                 s.width = width;
                 s.motion = motion;
                 s.flicker = flicker;
                 s.jitter = jitter;
                 s.patch = patch;
                 s.seed = seed;
                 return s;
             }),
             py::arg("clips_per_class") = 100, py::arg("frames") = 8, py::arg("height") = 32,
             py::arg("width") = 32, py::arg("motion") = 1.5, py::arg("flicker") = 0.08,
             py::arg("jitter") = 1.0, py::arg("patch") = 10, py::arg("seed") = 0)
        .def_readwrite("clips_per_class", &CorpusSpec::clips_per_class)
        .def_readwrite("frames", &CorpusSpec::frames)
        .def_readwrite("height", &CorpusSpec::height)
        .def_readwrite("width", &CorpusSpec::width)
        .def_readwrite("motion", &CorpusSpec::motion)
        .def_readwrite("flicker", &CorpusSpec::flicker)
        .def_readwrite("jitter", &CorpusSpec::jitter)
        .def_readwrite("patch", &CorpusSpec::patch)
        .def_readwrite("seed", &CorpusSpec::seed);

    py::class_<VideoClip>(m, "VideoClip")
        .def_readonly("label", &VideoClip::label)
        .def_readonly("id", &VideoClip::id)
        .def_readonly("split", &VideoClip::split)
        .def_property_readonly(
            "num_frames", [](const VideoClip& c) { return c.frames.size(); })
        .def("frame",
             [](const VideoClip& c, int t) {
                 if (t < 0 || t >= static_cast<int>(c.frames.size()))
                     throw std::out_of_range("frame " + std::to_string(t) + " of " +
                                             std::to_string(c.frames.size()));
                 return array_from_frame(c.frames[static_cast<std::size_t>(t)]);
             },
             py::arg("t"), "interleaved [H, W, 3] float array in [0, 1]")
        .def("__repr__", [](const VideoClip& c) {
            return "<VideoClip " + c.id + " label=" + std::to_string(c.label) + " frames=" +
                   std::to_string(c.frames.size()) + ">";
        });

    m.def(
        "generate_corpus",
        [](const CorpusSpec& spec, const std::filesystem::path& out_dir) {
            generate_corpus(spec, out_dir);
            return out_dir / "manifest.csv";
        },
        py::arg("spec"), py::arg("out_dir"),
        "write twin-pair clips plus manifest.csv, returns the manifest path");
    m.def("load_corpus", &load_corpus, py::arg("manifest"));

    m.def(
        "horn_schunck",
        [](const Array& prev, const Array& next, double alpha, int iters) {
            FramePair pair(image_from_array(prev), image_from_array(next));
            const FlowField f = horn_schunck(pair, alpha, iters);
            Array u({f.h, f.w}), v({f.h, f.w});
            std::copy(f.u.begin(), f.u.end(), u.mutable_data());
            std::copy(f.v.begin(), f.v.end(), v.mutable_data());
            return py::make_tuple(u, v);
        },
        py::arg("prev"), py::arg("next"), py::arg("alpha") = 1.0, py::arg("iters") = 200,
        "returns (u, v) flow planes in pixels per frame");
    m.def(
        "incoherence_score",
        [](const Array& u, const Array& v) {
            if (u.ndim() != 2 || v.ndim() != 2 || u.shape(0) != v.shape(0) ||
                u.shape(1) != v.shape(1))
                throw std::invalid_argument("u and v must be equal-extent 2-d arrays");
            FlowField f(static_cast<int>(u.shape(0)), static_cast<int>(u.shape(1)));
            std::copy(u.data(), u.data() + u.size(), f.u.begin());
            std::copy(v.data(), v.data() + v.size(), f.v.begin());
            return incoherence_score(f);
        },
        py::arg("u"), py::arg("v"));
    m.def("clip_incoherence", &clip_incoherence, py::arg("clip"), py::arg("alpha") = 1.0,
          py::arg("iters") = 200);
    m.def("clip_mean_abs_diff", &clip_mean_abs_diff, py::arg("clip"));

    m.def(
        "extract_slice",
        [](const VideoClip& clip, const std::string& axis, int index) {
            std::vector<Image> gray;
            gray.reserve(clip.frames.size());
            for (const auto& f : clip.frames) gray.push_back(luma(f));
            if (axis != "row" && axis != "column")
                throw std::invalid_argument("axis must be 'row' or 'column', got " + axis);
            return array_from_image(
                extract_slice(gray, axis == "row" ? SliceAxis::Row : SliceAxis::Column, index));
        },
        py::arg("clip"), py::arg("axis"), py::arg("index"),
        "luma slice stacked across frames, [frames, extent]");
    m.def(
        "slice_roughness",
        [](const Array& slice) { return slice_roughness(image_from_array(slice)); },
        py::arg("slice"));

    m.def("auc", &auc, py::arg("scores"), py::arg("labels"));
    m.def(
        "confusion",
        [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
            return confusion_dict(confusion(scores, labels, threshold));
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
    m.def(
        "metrics",
        [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
            const ConfusionMatrix cm = confusion(scores, labels, threshold);
            const Metrics mt = metrics(cm);
            py::dict d = confusion_dict(cm);
            d["accuracy"] = rate(mt.accuracy);
            d["recall"] = rate(mt.recall);
            d["tnr"] = rate(mt.tnr);
            d["precision"] = rate(mt.precision);
            try {
                d["auc"] = auc(scores, labels);
            } catch (const std::invalid_argument&) {
                d["auc"] = py::none();  // single-class input, no pairs to rank
            }
            return d;
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5,
        "confusion counts plus derived rates; undefined rates come back None");

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init([](int input_h, int input_w, int lookahead, int flow_iters,
                         double flow_alpha, bool uniform_map, std::uint64_t seed) {
                 ModelConfig g;
                 g.input_h = input_h;
                 g.input_w = input_w;
                 g.lookahead = lookahead;
                 g.flow_iters = flow_iters;
                 g.flow_alpha = flow_alpha;
                 g.temporal.uniform_map = uniform_map;
                 g.seed = seed;
                 return g;
             }),
             py::arg("input_h") = 32, py::arg("input_w") = 32, py::arg("lookahead") = 2,
             py::arg("flow_iters") = 60, py::arg("flow_alpha") = 1.0,
             py::arg("uniform_map") = false, py::arg("seed") = 0)
        .def_readwrite("input_h", &ModelConfig::input_h)
        .def_readwrite("input_w", &ModelConfig::input_w)
        .def_readwrite("lookahead", &ModelConfig::lookahead)
        .def_readwrite("flow_iters", &ModelConfig::flow_iters)
        .def_readwrite("flow_alpha", &ModelConfig::flow_alpha)
        .def_readwrite("seed", &ModelConfig::seed)
        .def("json", [](const ModelConfig& g) { return model_config_json(g); });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](int max_epochs, int patience, double lr, int batch, double split_ratio,
                         double threshold, int frames_per_clip, std::uint64_t seed) {
                 TrainConfig t;
                 t.max_epochs = max_epochs;
                 t.patience = patience;
                 t.lr = lr;
                 t.batch = batch;
                 t.split_ratio = split_ratio;
                 t.threshold = threshold;
                 t.frames_per_clip = frames_per_clip;
                 t.seed = seed;
                 return t;
             }),
             py::arg("max_epochs") = 80, py::arg("patience") = 10, py::arg("lr") = 0.05,
             py::arg("batch") = 16, py::arg("split_ratio") = 0.8, py::arg("threshold") = 0.5,
             py::arg("frames_per_clip") = 2, py::arg("seed") = 0)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("batch", &TrainConfig::batch)
        .def_readwrite("split_ratio", &TrainConfig::split_ratio)
        .def_readwrite("threshold", &TrainConfig::threshold)
        .def_readwrite("frames_per_clip", &TrainConfig::frames_per_clip)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<Detector, std::shared_ptr<Detector>>(m, "Detector")
        .def_property_readonly("config", [](const Detector& d) { return d.config; })
        .def_readonly("epoch", &Detector::epoch)
        .def_readonly("best_val_loss", &Detector::best_val_loss)
        .def("predict_clip",
             [](const Detector& d, const VideoClip& clip) {
                 return predict_clip(clip, d.config, d.params);
             },
             py::arg("clip"))
        .def("save",
             [](const Detector& d, const std::filesystem::path& path) {
                 save_checkpoint(path, d.params, d.config, d.epoch, d.best_val_loss);
             },
             py::arg("path"));

    m.def(
        "load_detector",
        [](const std::filesystem::path& path) {
            auto loaded = load_checkpoint(path);
            auto d = std::make_shared<Detector>();
            d->config = loaded.config;
            d->params = std::move(loaded.params);
            d->epoch = loaded.epoch;
            d->best_val_loss = loaded.best_val_loss;
            return d;
        },
        py::arg("path"));

    py::class_<TrainOutcome>(m, "TrainOutcome")
        .def_readonly("detector", &TrainOutcome::detector)
        .def_readonly("log_lines", &TrainOutcome::log_lines)
        .def_readonly("best_epoch", &TrainOutcome::best_epoch)
        .def_readonly("best_val_loss", &TrainOutcome::best_val_loss);

    m.def(
        "train_detector",
        [](const std::vector<VideoClip>& clips, const ModelConfig& mcfg, const TrainConfig& tcfg) {
            auto result = train_detector(clips, mcfg, tcfg);
            TrainOutcome out;
            auto d = std::make_shared<Detector>();
            d->config = mcfg;
            d->params = std::move(result.params);
            d->epoch = result.best_epoch;
            d->best_val_loss = result.best_val_loss;
            out.detector = std::move(d);
            out.log_lines = std::move(result.log_lines);
            out.best_epoch = result.best_epoch;
            out.best_val_loss = result.best_val_loss;
            return out;
        },
        py::arg("clips"), py::arg("model") = ModelConfig{}, py::arg("train") = TrainConfig{},
        py::call_guard<py::gil_scoped_release>());
}
