#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "robotseg/clicks.hpp"
#include "robotseg/imaging.hpp"
#include "robotseg/metrics.hpp"
#include "robotseg/model.hpp"

namespace robotseg {

struct EvalSetting {
    enum class Kind { Automatic, OneClick, ThreeClicks, BoundingBox, Interactive };
    Kind kind = Kind::Automatic;
    // Interactive-only knobs.
    double oi_threshold = 0.9;
    std::size_t oi_max_rounds = 3;
    std::size_t oi_clicks_per_round = 3;
};

// "au" | "1c" | "3c" | "bb" | "oi"; anything else is a config error.
EvalSetting::Kind parse_setting(const std::string& name);
std::string setting_name(EvalSetting::Kind kind);

struct EvalVideo {
    std::string name;
    std::string category;
    std::vector<Image> frames;
    // Per class: either one frame-0 mask or one per frame.
    std::map<TargetClass, std::vector<BinaryMask>> masks;
};

// Drives a session through one video under the given setting.
//
// AU issues no prompts. 1C/3C/BB simulate prompts from the frame-0 mask. OI
// starts as 3C and, at any frame whose IoU against ground truth falls below
// oi_threshold, adds up to oi_clicks_per_round corrective clicks (accumulated
// with the frame's earlier prompts) and re-runs that frame; at most
// oi_max_rounds rounds are spent across the whole video, and propagation
// continues from the corrected frame. OI without per-frame ground truth is a
// config error.
std::vector<BinaryMask> run_setting(const EvalVideo& video, SequenceModel& model,
                                    const EvalSetting& setting, TargetClass target);

struct VideoScore {
    std::string video;
    std::string category;
    VideoMetrics metrics;
};

struct MetricsReport {
    std::string setting;
    std::string target;
    std::vector<VideoScore> videos;
    std::vector<std::pair<std::string, VideoMetrics>> categories;  // name-sorted means
    VideoMetrics overall;  // unweighted mean over videos
};

MetricsReport aggregate(const std::vector<VideoScore>& scores, const std::string& setting,
                        const std::string& target);

// Serial fold over videos, one fresh session each; scoring needs per-frame
// masks for the target class.
MetricsReport evaluate_videos(const std::vector<EvalVideo>& videos, const RobotSegModel& model,
                              const EvalSetting& setting, TargetClass target,
                              double tol_factor = 0.008);

// One row per video. The JSON carries the summary as well.
void write_report_csv(const MetricsReport& report, const std::string& path);
void write_report_json(const MetricsReport& report, const std::string& path);

}  // namespace robotseg
