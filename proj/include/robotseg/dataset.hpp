#pragma once

#include <map>
#include <string>
#include <vector>

#include "robotseg/eval.hpp"
#include "robotseg/training.hpp"

namespace robotseg {

// Layout on disk: <root>/<split>/<category>/<video>/frames/%05d.png with
// sibling masks_robot/, masks_arm/, masks_gripper/ directories using the same
// numbering. Train videos carry at least the frame-0 mask per class, test
// videos one mask per frame per class; indexing checks both.

struct VideoEntry {
    std::string name;
    std::string category;
    std::string split;
    std::string frames_dir;
    std::map<TargetClass, std::string> mask_dirs;
    std::size_t frame_count = 0;
};

struct DatasetIndex {
    std::string root;
    std::string split;
    std::vector<VideoEntry> videos;  // sorted by (category, name)
};

std::string frame_filename(std::size_t index);  // "%05d.png"

DatasetIndex index_dataset(const std::string& root, const std::string& split);

// Frames in order from a bare frames directory (consecutive from 00000.png).
std::vector<Image> load_frames_dir(const std::string& frames_dir);

// Frames plus per-class masks: consecutive files from 00000.png, so a train
// entry yields one mask per class and a test entry a full set.
EvalVideo load_video(const VideoEntry& entry);

// Training view of the same entry: frames plus the frame-0 masks.
LoadedClip load_clip(const VideoEntry& entry);

std::vector<LoadedClip> load_training_clips(const DatasetIndex& index);
std::vector<EvalVideo> load_eval_videos(const DatasetIndex& index);

}  // namespace robotseg
