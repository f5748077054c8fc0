#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "robotseg/clicks.hpp"
#include "robotseg/config.hpp"
#include "robotseg/dataset.hpp"
#include "robotseg/eval.hpp"
#include "robotseg/imaging.hpp"
#include "robotseg/metrics.hpp"
#include "robotseg/model.hpp"
#include "robotseg/selfcheck.hpp"
#include "robotseg/synth.hpp"
#include "robotseg/training.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace robotseg;

namespace {

using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

BinaryMask to_mask(const MaskArray& a) {
    if (a.ndim() != 2) throw py::value_error("mask arrays are 2-D");
    BinaryMask m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    const std::uint8_t* p = a.data();
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = p[i] ? 1 : 0;
    return m;
}

py::array_t<std::uint8_t> from_mask(const BinaryMask& m) {
    py::array_t<std::uint8_t> a({m.height, m.width});
    std::uint8_t* p = a.mutable_data();
    for (std::size_t i = 0; i < m.data.size(); ++i) p[i] = m.data[i];
    return a;
}

RunConfig config_from_text(const std::string& text) {
    if (text.empty()) return RunConfig{};
    return parse_config_text(text);
}

py::dict metrics_dict(const VideoMetrics& m) {
    py::dict d;
    d["j"] = m.j;
    d["f"] = m.f;
    d["jf"] = m.jf;
    return d;
}

}  // namespace

PYBIND11_MODULE(_robotseg, m) {
    m.doc() = "robot video segmentation core";

    m.def("selfcheck", []() {
        std::ostringstream out;
        bool ok = selfcheck(out);
        return py::make_tuple(ok, out.str());
    });

    m.def("generate_synthetic_dataset", &generate_synthetic_dataset, py::arg("root"),
          py::arg("seed") = 7, py::arg("train_clips") = 8, py::arg("test_clips") = 2,
          py::arg("frames_per_clip") = 6, py::arg("image_size") = 96);

    m.def(
        "train",
        [](const std::string& data_root, const std::string& out_checkpoint,
           const std::string& config_text) {
            RunConfig cfg = config_from_text(config_text);
            DatasetIndex index = index_dataset(data_root, "train");
            std::vector<LoadedClip> clips = load_training_clips(index);
            RobotSegModel model(cfg.model, cfg.train.seed);
            DescriptorProvider provider;
            std::ostringstream log;
            train(model, clips, provider, cfg.train, log);
            model.params().save(out_checkpoint);
            return log.str();
        },
        py::arg("data_root"), py::arg("out_checkpoint"), py::arg("config_text") = "",
        "Train on a dataset's train split and save a checkpoint; returns the step log.");

    m.def(
        "evaluate",
        [](const std::string& checkpoint, const std::string& data_root, const std::string& setting,
           const std::string& target, const std::string& config_text) {
            RunConfig cfg = config_from_text(config_text);
            RobotSegModel model(cfg.model, cfg.train.seed);
            model.params().load(checkpoint);
            DatasetIndex index = index_dataset(data_root, "test");
            std::vector<EvalVideo> videos = load_eval_videos(index);
            MetricsReport rep = evaluate_videos(videos, model, make_setting(cfg, parse_setting(setting)),
                                                parse_target(target), cfg.boundary_tol_factor);
            py::dict d = metrics_dict(rep.overall);
            d["setting"] = rep.setting;
            d["target"] = rep.target;
            py::list vids;
            for (const VideoScore& v : rep.videos) {
                py::dict vd = metrics_dict(v.metrics);
                vd["video"] = v.video;
                vd["category"] = v.category;
                vids.append(vd);
            }
            d["videos"] = vids;
            return d;
        },
        py::arg("checkpoint"), py::arg("data_root"), py::arg("setting") = "au",
        py::arg("target") = "robot", py::arg("config_text") = "",
        "Evaluate a checkpoint on a dataset's test split.");

    m.def(
        "infer",
        [](const std::string& checkpoint, const std::string& video_dir, const std::string& out_dir,
           const std::string& target, const std::string& config_text) {
            RunConfig cfg = config_from_text(config_text);
            RobotSegModel model(cfg.model, cfg.train.seed);
            model.params().load(checkpoint);
            fs::path frames_dir = fs::path(video_dir) / "frames";
            if (!fs::is_directory(frames_dir)) frames_dir = video_dir;
            std::vector<Image> frames = load_frames_dir(frames_dir.string());
            fs::create_directories(out_dir);
            RobotSegSession session(model, parse_target(target));
            for (std::size_t i = 0; i < frames.size(); ++i) {
                BinaryMask mask =
                    i == 0 ? session.begin(frames[0], Prompts{}) : session.advance(frames[i]);
                save_mask(mask, (fs::path(out_dir) / frame_filename(i)).string());
            }
            return frames.size();
        },
        py::arg("checkpoint"), py::arg("video_dir"), py::arg("out_dir"),
        py::arg("target") = "robot", py::arg("config_text") = "",
        "Propagate masks over one video directory; returns the frame count.");

    m.def(
        "jaccard",
        [](const MaskArray& pred, const MaskArray& gt) { return jaccard(to_mask(pred), to_mask(gt)); },
        py::arg("pred"), py::arg("gt"));

    m.def(
        "boundary_f",
        [](const MaskArray& pred, const MaskArray& gt, py::object tol) {
            BinaryMask p = to_mask(pred), g = to_mask(gt);
            std::size_t t = tol.is_none() ? boundary_tolerance(g.height, g.width)
                                          : tol.cast<std::size_t>();
            return boundary_f(p, g, t);
        },
        py::arg("pred"), py::arg("gt"), py::arg("tol") = py::none());

    m.def(
        "simulate_clicks",
        [](const MaskArray& gt, py::object pred, std::size_t n) {
            BinaryMask g = to_mask(gt);
            py::list out;
            auto emit = [&](const std::vector<Click>& clicks) {
                for (const Click& c : clicks) out.append(py::make_tuple(c.y, c.x, c.positive));
            };
            if (pred.is_none()) {
                emit(simulate_clicks(g, nullptr, n));
            } else {
                BinaryMask p = to_mask(pred.cast<MaskArray>());
                emit(simulate_clicks(g, &p, n));
            }
            return out;
        },
        py::arg("gt"), py::arg("pred") = py::none(), py::arg("n") = 3,
        "Deterministic correction clicks as (y, x, positive) tuples.");

    m.def(
        "load_mask", [](const std::string& path) { return from_mask(load_mask(path)); },
        py::arg("path"));

    m.def(
        "save_mask",
        [](const MaskArray& mask, const std::string& path) { save_mask(to_mask(mask), path); },
        py::arg("mask"), py::arg("path"));
}
