#pragma once

#include <string>

#include "robotseg/eval.hpp"
#include "robotseg/training.hpp"

namespace robotseg {

// Everything a run needs, with desk-scale defaults. Files are flat
// `key = value` lines; '#' starts a comment and unknown keys are errors.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    double oi_threshold = 0.9;
    std::size_t oi_max_rounds = 3;
    std::size_t oi_clicks_per_round = 3;
    double boundary_tol_factor = 0.008;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

EvalSetting make_setting(const RunConfig& cfg, EvalSetting::Kind kind);

}  // namespace robotseg
