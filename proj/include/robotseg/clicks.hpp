#pragma once

#include <cstddef>
#include <vector>

#include "robotseg/imaging.hpp"
#include "robotseg/model.hpp"

namespace robotseg {

// Deterministic user simulation for prompted evaluation.
//
// The first click is always positive, at the interior point of gt farthest
// from its background (ties: lowest row-major index). Each later click finds
// the largest remaining error region (4-connected component of pred vs gt
// disagreement, FN and FP kept separate; size ties go to the region whose
// first pixel is earliest row-major), clicks its internal distance-transform
// peak, and consumes the region. False negatives get positive clicks, false
// positives negative ones. A null pred means an all-empty prediction.
// Returns fewer than n clicks when the error regions run out; an empty gt
// yields no clicks at all.
std::vector<Click> simulate_clicks(const BinaryMask& gt, const BinaryMask* pred, std::size_t n);

// Tight axis-aligned box around gt. Empty gt has no box and throws.
Box simulate_bbox(const BinaryMask& gt);

}  // namespace robotseg
