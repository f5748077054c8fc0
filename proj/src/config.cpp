#include "robotseg/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "robotseg/errors.hpp"

namespace robotseg {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_f64(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not a number: " + value);
    }
    if (pos != value.size()) throw ConfigError("config key " + key + ": not a number: " + value);
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    if (value.empty() || value[0] == '-' || value[0] == '+') {
        throw ConfigError("config key " + key + ": not a non-negative integer: " + value);
    }
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not a non-negative integer: " + value);
    }
    if (pos != value.size()) {
        throw ConfigError("config key " + key + ": not a non-negative integer: " + value);
    }
    return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(parse_u64(key, value));
}

std::vector<TargetClass> parse_targets(const std::string& value) {
    if (value == "all") {
        return {TargetClass::Arm, TargetClass::Gripper, TargetClass::Robot};
    }
    return {parse_target(value)};  // throws ConfigError on anything unknown
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }

        if (key == "channels") cfg.model.channels = parse_size(key, value);
        else if (key == "decoder_masks") cfg.model.decoder_masks = parse_size(key, value);
        else if (key == "memory_capacity") cfg.model.memory_capacity = parse_size(key, value);
        else if (key == "rpg_regions") cfg.model.rpg_regions = parse_size(key, value);
        else if (key == "rpg_subclusters") cfg.model.rpg_subclusters = parse_size(key, value);
        else if (key == "canny_sigma") cfg.model.canny_sigma = parse_f64(key, value);
        else if (key == "canny_low") cfg.model.canny_low = parse_f64(key, value);
        else if (key == "canny_high") cfg.model.canny_high = parse_f64(key, value);
        else if (key == "w_cyc") cfg.train.weights.w_cyc = parse_f64(key, value);
        else if (key == "w_sem") cfg.train.weights.w_sem = parse_f64(key, value);
        else if (key == "w_patch") cfg.train.weights.w_patch = parse_f64(key, value);
        else if (key == "w_struct") cfg.train.weights.w_struct = parse_f64(key, value);
        else if (key == "focal_weight") cfg.train.weights.focal_w = parse_f64(key, value);
        else if (key == "dice_weight") cfg.train.weights.dice_w = parse_f64(key, value);
        else if (key == "tau") cfg.train.tau = parse_f64(key, value);
        else if (key == "steps") {
            cfg.train.steps = parse_size(key, value);
            cfg.train.adam.total_steps = cfg.train.steps;
        } else if (key == "batch_size") cfg.train.batch_size = parse_size(key, value);
        else if (key == "cycle_max_t") cfg.train.cycle_max_t = parse_size(key, value);
        else if (key == "lr_encoder") cfg.train.adam.lr_encoder = parse_f64(key, value);
        else if (key == "lr_rest") cfg.train.adam.lr_rest = parse_f64(key, value);
        else if (key == "seed") cfg.train.seed = parse_u64(key, value);
        else if (key == "train_target") cfg.train.targets = parse_targets(value);
        else if (key == "oi_threshold") cfg.oi_threshold = parse_f64(key, value);
        else if (key == "oi_max_rounds") cfg.oi_max_rounds = parse_size(key, value);
        else if (key == "oi_clicks_per_round") cfg.oi_clicks_per_round = parse_size(key, value);
        else if (key == "boundary_tol_factor") cfg.boundary_tol_factor = parse_f64(key, value);
        else throw ConfigError("unknown config key: " + key);
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

EvalSetting make_setting(const RunConfig& cfg, EvalSetting::Kind kind) {
    EvalSetting s;
    s.kind = kind;
    s.oi_threshold = cfg.oi_threshold;
    s.oi_max_rounds = cfg.oi_max_rounds;
    s.oi_clicks_per_round = cfg.oi_clicks_per_round;
    return s;
}

}  // namespace robotseg
