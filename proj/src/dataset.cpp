#include "robotseg/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "robotseg/errors.hpp"

namespace fs = std::filesystem;

namespace robotseg {

namespace {

const std::pair<TargetClass, const char*> kMaskDirs[] = {
    {TargetClass::Robot, "masks_robot"},
    {TargetClass::Arm, "masks_arm"},
    {TargetClass::Gripper, "masks_gripper"},
};

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

std::size_t count_numbered(const fs::path& dir) {
    std::size_t n = 0;
    while (fs::exists(dir / frame_filename(n))) ++n;
    return n;
}

}  // namespace

std::string frame_filename(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05zu.png", index);
    return buf;
}

DatasetIndex index_dataset(const std::string& root, const std::string& split) {
    fs::path base = fs::path(root) / split;
    if (!fs::is_directory(base)) throw IoError("no such split directory: " + base.string());

    DatasetIndex index;
    index.root = root;
    index.split = split;
    for (const std::string& category : sorted_subdirs(base)) {
        for (const std::string& name : sorted_subdirs(base / category)) {
            fs::path vdir = base / category / name;
            VideoEntry entry;
            entry.name = name;
            entry.category = category;
            entry.split = split;
            entry.frames_dir = (vdir / "frames").string();
            if (!fs::is_directory(entry.frames_dir)) {
                throw IoError("video without a frames directory: " + vdir.string());
            }
            entry.frame_count = count_numbered(entry.frames_dir);
            if (entry.frame_count == 0) throw IoError("no frames in " + entry.frames_dir);

            for (const auto& [cls, dirname] : kMaskDirs) {
                fs::path mdir = vdir / dirname;
                if (!fs::is_directory(mdir)) {
                    throw IoError("missing mask directory " + mdir.string());
                }
                // The split's annotation contract: frame 0 for training
                // videos, every frame for test videos.
                std::size_t need = split == "test" ? entry.frame_count : 1;
                for (std::size_t i = 0; i < need; ++i) {
                    if (!fs::exists(mdir / frame_filename(i))) {
                        throw IoError("missing mask " + (mdir / frame_filename(i)).string());
                    }
                }
                entry.mask_dirs[cls] = mdir.string();
            }
            index.videos.push_back(std::move(entry));
        }
    }
    return index;
}

std::vector<Image> load_frames_dir(const std::string& frames_dir) {
    if (!fs::is_directory(frames_dir)) throw IoError("no such directory: " + frames_dir);
    std::size_t n = count_numbered(frames_dir);
    if (n == 0) throw IoError("no frames in " + frames_dir);
    std::vector<Image> frames;
    frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        frames.push_back(load_image((fs::path(frames_dir) / frame_filename(i)).string()));
    }
    return frames;
}

EvalVideo load_video(const VideoEntry& entry) {
    EvalVideo v;
    v.name = entry.name;
    v.category = entry.category;
    v.frames = load_frames_dir(entry.frames_dir);
    for (const auto& [cls, dir] : entry.mask_dirs) {
        std::vector<BinaryMask> masks;
        for (std::size_t i = 0; i < entry.frame_count; ++i) {
            fs::path p = fs::path(dir) / frame_filename(i);
            if (!fs::exists(p)) break;
            masks.push_back(load_mask(p.string()));
        }
        v.masks[cls] = std::move(masks);
    }
    return v;
}

LoadedClip load_clip(const VideoEntry& entry) {
    LoadedClip clip;
    clip.name = entry.category + "/" + entry.name;
    clip.frames = load_frames_dir(entry.frames_dir);
    for (const auto& [cls, dir] : entry.mask_dirs) {
        clip.g0[cls] = load_mask((fs::path(dir) / frame_filename(0)).string());
    }
    return clip;
}

std::vector<LoadedClip> load_training_clips(const DatasetIndex& index) {
    std::vector<LoadedClip> clips;
    clips.reserve(index.videos.size());
    for (const VideoEntry& e : index.videos) clips.push_back(load_clip(e));
    return clips;
}

std::vector<EvalVideo> load_eval_videos(const DatasetIndex& index) {
    std::vector<EvalVideo> videos;
    videos.reserve(index.videos.size());
    for (const VideoEntry& e : index.videos) videos.push_back(load_video(e));
    return videos;
}

}  // namespace robotseg
