#include "robotseg/eval.hpp"

#include <fstream>
#include <iomanip>
#include <map>

#include <json.hpp>

#include "robotseg/errors.hpp"

namespace robotseg {

EvalSetting::Kind parse_setting(const std::string& name) {
    if (name == "au") return EvalSetting::Kind::Automatic;
    if (name == "1c") return EvalSetting::Kind::OneClick;
    if (name == "3c") return EvalSetting::Kind::ThreeClicks;
    if (name == "bb") return EvalSetting::Kind::BoundingBox;
    if (name == "oi") return EvalSetting::Kind::Interactive;
    throw ConfigError("unknown evaluation setting: " + name);
}

std::string setting_name(EvalSetting::Kind kind) {
    switch (kind) {
        case EvalSetting::Kind::Automatic: return "au";
        case EvalSetting::Kind::OneClick: return "1c";
        case EvalSetting::Kind::ThreeClicks: return "3c";
        case EvalSetting::Kind::BoundingBox: return "bb";
        case EvalSetting::Kind::Interactive: return "oi";
    }
    throw ConfigError("unknown evaluation setting");
}

namespace {

// One frame's correction loop. Clicks accumulate into acc so later rounds on
// the same frame re-run with everything said so far. Rounds are a video-wide
// budget. Returns immediately once the threshold is met or nothing clickable
// remains.
void oi_refine(SequenceModel& model, const BinaryMask& gt, BinaryMask& pred, Prompts& acc,
               const EvalSetting& s, std::size_t& rounds_left) {
    while (rounds_left > 0 && jaccard(pred, gt) / 100.0 < s.oi_threshold) {
        std::vector<Click> extra = simulate_clicks(gt, &pred, s.oi_clicks_per_round);
        if (extra.empty()) break;
        acc.clicks.insert(acc.clicks.end(), extra.begin(), extra.end());
        --rounds_left;
        pred = model.correct(acc);
    }
}

}  // namespace

std::vector<BinaryMask> run_setting(const EvalVideo& video, SequenceModel& model,
                                    const EvalSetting& setting, TargetClass target) {
    if (video.frames.empty()) throw ContractError("run_setting: video has no frames");
    using Kind = EvalSetting::Kind;

    const std::vector<BinaryMask>* gts = nullptr;
    auto it = video.masks.find(target);
    if (it != video.masks.end() && !it->second.empty()) gts = &it->second;

    if (setting.kind != Kind::Automatic && !gts) {
        throw ContractError("run_setting: " + setting_name(setting.kind) +
                            " needs a frame-0 mask for class " + target_name(target));
    }
    if (setting.kind == Kind::Interactive && gts->size() != video.frames.size()) {
        throw ConfigError("interactive evaluation needs a ground-truth mask for every frame");
    }

    Prompts p0;
    switch (setting.kind) {
        case Kind::Automatic: break;
        case Kind::OneClick: p0.clicks = simulate_clicks((*gts)[0], nullptr, 1); break;
        case Kind::ThreeClicks:
        case Kind::Interactive: p0.clicks = simulate_clicks((*gts)[0], nullptr, 3); break;
        case Kind::BoundingBox: p0.box = simulate_bbox((*gts)[0]); break;
    }

    std::size_t rounds_left = setting.kind == Kind::Interactive ? setting.oi_max_rounds : 0;

    std::vector<BinaryMask> preds;
    preds.reserve(video.frames.size());
    BinaryMask pred = model.begin(video.frames[0], p0);
    if (setting.kind == Kind::Interactive) {
        Prompts acc = p0;
        oi_refine(model, (*gts)[0], pred, acc, setting, rounds_left);
    }
    preds.push_back(pred);

    for (std::size_t i = 1; i < video.frames.size(); ++i) {
        pred = model.advance(video.frames[i]);
        if (setting.kind == Kind::Interactive) {
            Prompts acc;
            oi_refine(model, (*gts)[i], pred, acc, setting, rounds_left);
        }
        preds.push_back(pred);
    }
    return preds;
}

MetricsReport aggregate(const std::vector<VideoScore>& scores, const std::string& setting,
                        const std::string& target) {
    MetricsReport rep;
    rep.setting = setting;
    rep.target = target;
    rep.videos = scores;
    if (scores.empty()) return rep;

    std::map<std::string, std::pair<VideoMetrics, std::size_t>> by_cat;
    for (const VideoScore& s : scores) {
        auto& [sum, n] = by_cat[s.category];
        sum.j += s.metrics.j;
        sum.f += s.metrics.f;
        sum.jf += s.metrics.jf;
        ++n;
        rep.overall.j += s.metrics.j;
        rep.overall.f += s.metrics.f;
        rep.overall.jf += s.metrics.jf;
    }
    for (auto& [name, acc] : by_cat) {
        double n = static_cast<double>(acc.second);
        rep.categories.push_back({name, {acc.first.j / n, acc.first.f / n, acc.first.jf / n}});
    }
    double n = static_cast<double>(scores.size());
    rep.overall.j /= n;
    rep.overall.f /= n;
    rep.overall.jf /= n;
    return rep;
}

MetricsReport evaluate_videos(const std::vector<EvalVideo>& videos, const RobotSegModel& model,
                              const EvalSetting& setting, TargetClass target, double tol_factor) {
    std::vector<VideoScore> scores;
    scores.reserve(videos.size());
    for (const EvalVideo& v : videos) {
        auto it = v.masks.find(target);
        if (it == v.masks.end() || it->second.size() != v.frames.size()) {
            throw ContractError("evaluate: video " + v.name + " lacks per-frame masks for class " +
                                target_name(target));
        }
        RobotSegSession session(model, target);
        std::vector<BinaryMask> preds = run_setting(v, session, setting, target);
        std::size_t tol =
            boundary_tolerance(v.frames[0].height, v.frames[0].width, tol_factor);
        scores.push_back({v.name, v.category, jf_video(preds, it->second, tol)});
    }
    return aggregate(scores, setting_name(setting.kind), target_name(target));
}

void write_report_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << std::fixed << std::setprecision(6);
    out << "video,category,j,f,jf\n";
    for (const VideoScore& s : report.videos) {
        out << s.video << ',' << s.category << ',' << s.metrics.j << ',' << s.metrics.f << ','
            << s.metrics.jf << '\n';
    }
    if (!out) throw IoError("failed while writing " + path);
}

void write_report_json(const MetricsReport& report, const std::string& path) {
    nlohmann::json j;
    j["setting"] = report.setting;
    j["target"] = report.target;
    j["overall"] = {{"j", report.overall.j}, {"f", report.overall.f}, {"jf", report.overall.jf}};
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [name, m] : report.categories) {
        cats[name] = {{"j", m.j}, {"f", m.f}, {"jf", m.jf}};
    }
    j["categories"] = cats;
    nlohmann::json vids = nlohmann::json::array();
    for (const VideoScore& s : report.videos) {
        vids.push_back({{"name", s.video},
                        {"category", s.category},
                        {"j", s.metrics.j},
                        {"f", s.metrics.f},
                        {"jf", s.metrics.jf}});
    }
    j["videos"] = vids;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed while writing " + path);
}

}  // namespace robotseg
