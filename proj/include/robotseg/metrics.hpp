#pragma once

#include <cstddef>
#include <vector>

#include "robotseg/imaging.hpp"

namespace robotseg {

// DAVIS-style boundary tolerance: ceil(factor * image diagonal) pixels.
std::size_t boundary_tolerance(std::size_t h, std::size_t w, double factor = 0.008);

// Region similarity, 100 * |pred & gt| / |pred | gt|. Two empty masks agree
// perfectly (scores 100); that rewards a correct occlusion call.
double jaccard(const BinaryMask& pred, const BinaryMask& gt);

// Boundary F-measure: precision is the fraction of predicted boundary pixels
// within tol (Euclidean) of the ground-truth boundary, recall the reverse,
// F = 200*P*R/(P+R). Both boundaries empty -> 100, exactly one empty -> 0.
double boundary_f(const BinaryMask& pred, const BinaryMask& gt, std::size_t tol);

struct VideoMetrics {
    double j = 0.0;
    double f = 0.0;
    double jf = 0.0;
};

// Frame-wise J and F averaged over the sequence; jf is their mean.
VideoMetrics jf_video(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                      std::size_t tol);

}  // namespace robotseg
