#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "robotseg/config.hpp"
#include "robotseg/dataset.hpp"
#include "robotseg/errors.hpp"
#include "robotseg/eval.hpp"
#include "robotseg/selfcheck.hpp"
#include "robotseg/synth.hpp"
#include "robotseg/training.hpp"

namespace fs = std::filesystem;
using namespace robotseg;

namespace {

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return parse_config_file(path);
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out) {
    RunConfig cfg = load_config(config_path);
    DatasetIndex index = index_dataset(data, "train");
    std::vector<LoadedClip> clips = load_training_clips(index);
    std::cout << "training on " << clips.size() << " clips, " << cfg.train.steps << " steps\n";
    RobotSegModel model(cfg.model, cfg.train.seed);
    DescriptorProvider provider;
    train(model, clips, provider, cfg.train, std::cout);
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    model.params().save(out);
    std::cout << "saved checkpoint to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt, const std::string& data,
             const std::string& setting_str, const std::string& target_str,
             const std::string& report_dir) {
    RunConfig cfg = load_config(config_path);
    RobotSegModel model(cfg.model, cfg.train.seed);
    model.params().load(ckpt);
    EvalSetting setting = make_setting(cfg, parse_setting(setting_str));
    TargetClass target = parse_target(target_str);

    DatasetIndex index = index_dataset(data, "test");
    std::vector<EvalVideo> videos = load_eval_videos(index);
    MetricsReport report =
        evaluate_videos(videos, model, setting, target, cfg.boundary_tol_factor);

    fs::create_directories(report_dir);
    write_report_csv(report, (fs::path(report_dir) / "report.csv").string());
    write_report_json(report, (fs::path(report_dir) / "report.json").string());
    std::cout << "setting " << report.setting << " target " << report.target << ": J "
              << report.overall.j << "  F " << report.overall.f << "  J&F " << report.overall.jf
              << " over " << report.videos.size() << " videos\n";
    return 0;
}

int cmd_infer(const std::string& config_path, const std::string& ckpt, const std::string& video,
              const std::string& target_str, const std::string& out) {
    RunConfig cfg = load_config(config_path);
    RobotSegModel model(cfg.model, cfg.train.seed);
    model.params().load(ckpt);
    TargetClass target = parse_target(target_str);

    fs::path frames_dir = fs::path(video) / "frames";
    if (!fs::is_directory(frames_dir)) frames_dir = video;  // bare directory of frames
    std::vector<Image> frames = load_frames_dir(frames_dir.string());

    fs::create_directories(out);
    RobotSegSession session(model, target);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        BinaryMask mask = i == 0 ? session.begin(frames[0], Prompts{}) : session.advance(frames[i]);
        save_mask(mask, (fs::path(out) / frame_filename(i)).string());
    }
    std::cout << "wrote " << frames.size() << " masks to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robot video segmentation"};
    app.require_subcommand(1);

    std::string config_path, data, out, ckpt, setting = "au", target = "robot", video, report;
    std::uint64_t seed = 7;
    std::size_t clips = 8, test_clips = 2, frames = 6, size = 96;

    CLI::App* train_cmd = app.add_subcommand("train", "train on first-frame-annotated clips");
    train_cmd->add_option("--config", config_path, "config file (key = value lines)");
    train_cmd->add_option("--data", data, "dataset root")->required();
    train_cmd->add_option("--out", out, "checkpoint output path")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "score the test split");
    eval_cmd->add_option("--config", config_path, "config file");
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", data, "dataset root")->required();
    eval_cmd->add_option("--setting", setting, "au|1c|3c|bb|oi");
    eval_cmd->add_option("--target", target, "robot|arm|gripper");
    eval_cmd->add_option("--report", report, "report output directory")->required();

    CLI::App* infer_cmd = app.add_subcommand("infer", "segment one video");
    infer_cmd->add_option("--config", config_path, "config file");
    infer_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
    infer_cmd->add_option("--video", video, "video directory (frames/%05d.png)")->required();
    infer_cmd->add_option("--target", target, "robot|arm|gripper");
    infer_cmd->add_option("--out", out, "mask output directory")->required();

    CLI::App* selfcheck_cmd = app.add_subcommand("selfcheck", "run the diagnostic battery");

    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--out", out, "dataset root to create")->required();
    synth_cmd->add_option("--seed", seed, "generator seed");
    synth_cmd->add_option("--clips", clips, "training clips");
    synth_cmd->add_option("--test-clips", test_clips, "test clips");
    synth_cmd->add_option("--frames", frames, "frames per clip");
    synth_cmd->add_option("--size", size, "frame side length");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, data, out);
        if (eval_cmd->parsed()) return cmd_eval(config_path, ckpt, data, setting, target, report);
        if (infer_cmd->parsed()) return cmd_infer(config_path, ckpt, video, target, out);
        if (selfcheck_cmd->parsed()) return selfcheck(std::cout) ? 0 : 1;
        if (synth_cmd->parsed()) {
            generate_synthetic_dataset(out, seed, clips, test_clips, frames, size);
            std::cout << "wrote synthetic dataset to " << out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
