#pragma once

#include <cstdint>
#include <string>

namespace robotseg {

// Writes a small synthetic corpus under root: a two-part rigid body (colored
// arm bar plus a two-prong gripper) translating with bounce over a textured
// background, split into train/ and test/ with two categories of body shape.
// Train videos get frame-0 masks only, test videos a mask per frame, matching
// the dataset layout the indexer expects.
void generate_synthetic_dataset(const std::string& root, std::uint64_t seed,
                                std::size_t train_clips = 8, std::size_t test_clips = 2,
                                std::size_t frames_per_clip = 6, std::size_t image_size = 96);

}  // namespace robotseg
