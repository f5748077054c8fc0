#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robotseg/imaging.hpp"
#include "robotseg/tensor.hpp"

namespace robotseg {

enum class TargetClass { Arm = 0, Gripper = 1, Robot = 2 };

TargetClass parse_target(const std::string& name);  // "arm" | "gripper" | "robot"
std::string target_name(TargetClass target);

struct Point {
    std::size_t y = 0;
    std::size_t x = 0;
};

struct FpsResult {
    std::vector<std::size_t> indices;  // into the input point list
    bool shortfall = false;            // fewer points than requested
};

// Greedy farthest-point sampling. Seed = first point of the list (callers
// supply row-major foreground order); ties break to the lowest index.
FpsResult fps(const std::vector<Point>& points, std::size_t k);

struct ClusterResult {
    std::vector<std::size_t> assignments;  // nearest final center per point
    Tensor centers;                        // [k, C]
    double inertia = 0.0;
    std::vector<double> inertia_history;   // after each assignment step
};

// Lloyd iterations from the given centers. An emptied cluster is reseeded at
// the point contributing most to the inertia. Stops when assignments settle
// or after max_iter rounds; a final pass re-assigns against the final centers.
ClusterResult kmeans(const Tensor& features, const Tensor& init_centers, std::size_t max_iter);

struct ObjectTokens {
    Tensor values;                    // [N, R, S*C]
    std::vector<std::uint8_t> valid;  // per frame; 0 -> empty foreground, zero tokens
};

// Hierarchical token construction per memory frame: FPS seeds R macro regions,
// KMeans splits the foreground, then per region FPS seeds S micro clusters
// whose centers concatenate into one token. Shortfalls pad by repetition so
// the output shape never varies. Values are plain data (no gradient).
ObjectTokens object_tokens(const Tensor& F_pre, const std::vector<BinaryMask>& M_pre,
                           std::size_t R, std::size_t S);

// Row of the learnable [3, d] bank for the target, as a [1, d] prompt token.
Tensor class_tokens(const Tensor& bank, TargetClass target);

// Linear S*C -> d over flattened frame/region axes; w [S*C, d], b [d].
Tensor project_tokens(const ObjectTokens& tokens, const Tensor& w, const Tensor& b);

// Row-major foreground coordinates of a mask.
std::vector<Point> foreground_points(const BinaryMask& mask);

}  // namespace robotseg
