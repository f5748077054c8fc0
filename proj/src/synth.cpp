#include "robotseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "robotseg/dataset.hpp"
#include "robotseg/errors.hpp"
#include "robotseg/imaging.hpp"

namespace fs = std::filesystem;

namespace robotseg {

namespace {

// All geometry is expressed in 16-pixel cells and every moving part travels in
// whole cells, so objects never straddle a cell boundary in any frame.
constexpr std::size_t kCell = 16;

struct BodySpec {
    std::size_t arm_h, arm_w, prong_h, prong_w, gap;  // cells
    std::size_t height() const { return std::max(arm_h, 2 * prong_h + gap) * kCell; }
    std::size_t width() const { return (arm_w + prong_w) * kCell; }
};

// Two body shapes so the categories differ in more than texture: riga has a
// slim arm and two separated prongs, rigb a tall arm with a solid claw block.
BodySpec spec_for(const std::string& category) {
    if (category == "riga") return {2, 3, 1, 1, 1};
    return {3, 2, 1, 2, 0};
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// One scene: textured background, a flat distractor block sharing the arm's
// color, the body itself, and a static occluder bar in front of everything.
// Masks mark visible body pixels only, so the bar punches a hole through them
// and the distractor never appears in them.
void render(std::size_t n, const BodySpec& b, std::size_t ay, std::size_t ax, std::size_t dy,
            std::size_t dx, std::size_t bar_x, const double ph[3], Image& img, BinaryMask& arm,
            BinaryMask& grip) {
    img = make_image(n, n, 3);
    arm = BinaryMask(n, n);
    grip = BinaryMask(n, n);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            double xf = static_cast<double>(x), yf = static_cast<double>(y);
            double base = 0.5 + 0.18 * std::sin(0.31 * xf + ph[0]) * std::cos(0.23 * yf + ph[1]) +
                          0.12 * static_cast<double>(((y / 8) + (x / 8)) % 2) +
                          0.05 * std::sin(0.91 * (xf + yf) + ph[2]);
            img.at(y, x, 0) = clamp01(0.18 * base + 0.06);
            img.at(y, x, 1) = clamp01(0.55 * base + 0.18);
            img.at(y, x, 2) = clamp01(0.62 * base + 0.22);
        }
    }
    auto paint = [&](std::size_t y0, std::size_t x0, std::size_t h, std::size_t w,
                     BinaryMask* mask, double r, double g, double bl, bool textured) {
        for (std::size_t y = y0; y < y0 + h && y < n; ++y) {
            for (std::size_t x = x0; x < x0 + w && x < n; ++x) {
                double tex = textured ? ((x + y) % 2 ? 0.08 : -0.08) : 0.0;
                img.at(y, x, 0) = clamp01(r + tex);
                img.at(y, x, 1) = clamp01(g + 0.5 * tex);
                img.at(y, x, 2) = bl;
                if (mask) mask->at(y, x) = 1;
            }
        }
    };
    paint(dy, dx, 3 * kCell, 3 * kCell, nullptr, 0.86, 0.16, 0.12, false);
    paint(ay, ax, b.arm_h * kCell, b.arm_w * kCell, &arm, 0.86, 0.16, 0.12, true);
    std::size_t px = ax + b.arm_w * kCell;
    paint(ay, px, b.prong_h * kCell, b.prong_w * kCell, &grip, 0.93, 0.38, 0.08, true);
    paint(ay + (b.prong_h + b.gap) * kCell, px, b.prong_h * kCell, b.prong_w * kCell, &grip, 0.93,
          0.38, 0.08, true);
    // The bar occludes the body, so its pixels leave the masks again.
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = bar_x; x < bar_x + kCell && x < n; ++x) {
            img.at(y, x, 0) = 0.24 + 0.03 * static_cast<double>(y % 2);
            img.at(y, x, 1) = 0.25;
            img.at(y, x, 2) = 0.28;
            arm.at(y, x) = 0;
            grip.at(y, x) = 0;
        }
    }
}

// Cell-stepped bounce inside [lo, hi]; all arguments are cell-aligned.
void bounce(std::size_t& pos, long& vel, std::size_t lo, std::size_t hi) {
    long p = static_cast<long>(pos) + vel;
    long l = static_cast<long>(lo), h = static_cast<long>(hi);
    if (p < l) {
        p = 2 * l - p;
        vel = -vel;
    } else if (p > h) {
        p = 2 * h - p;
        vel = -vel;
    }
    pos = static_cast<std::size_t>(std::clamp(p, l, h));
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

std::size_t pick_cell(std::mt19937_64& rng, std::size_t hi) {  // cell-aligned 0..hi
    return kCell * pick(rng, hi / kCell + 1);
}

long pick_vel(std::mt19937_64& rng) {  // one or two cells per frame, either direction
    return static_cast<long>(kCell * (1 + pick(rng, 2))) * (pick(rng, 2) ? 1 : -1);
}

long pick_vel_fast(std::mt19937_64& rng) {  // always two cells per frame
    return static_cast<long>(2 * kCell) * (pick(rng, 2) ? 1 : -1);
}

bool overlaps(std::size_t a0, std::size_t alen, std::size_t b0, std::size_t blen) {
    return a0 < b0 + blen && b0 < a0 + alen;
}

void write_clip(const fs::path& dir, const std::string& category, std::mt19937_64& rng,
                std::size_t frames, std::size_t n, bool masks_every_frame) {
    BodySpec body = spec_for(category);
    std::size_t n16 = (n / kCell) * kCell;
    std::size_t yhi = n16 - body.height();
    std::size_t xhi = n16 - body.width();

    double ph[3] = {6.28 * static_cast<double>(pick(rng, 1000)) / 1000.0,
                    6.28 * static_cast<double>(pick(rng, 1000)) / 1000.0,
                    6.28 * static_cast<double>(pick(rng, 1000)) / 1000.0};
    std::size_t ay = pick_cell(rng, yhi);
    std::size_t ax = pick_cell(rng, xhi);
    long vy = pick_vel(rng), vx = pick_vel(rng);

    // The bar stays clear of the body's starting span so frame-0 masks show
    // every part, and the distractor starts clear of both so its appearance
    // is on record from the first frame.
    std::size_t bar_x = pick_cell(rng, n16 - kCell);
    for (int t = 0; t < 64 && overlaps(bar_x, kCell, ax, body.width()); ++t)
        bar_x = pick_cell(rng, n16 - kCell);
    std::size_t dside = 3 * kCell;
    std::size_t dy = pick_cell(rng, n16 - dside), dx = pick_cell(rng, n16 - dside);
    for (int t = 0; t < 64 && (overlaps(dx, dside, bar_x, kCell) ||
                               (overlaps(dy, dside, ay, body.height()) &&
                                overlaps(dx, dside, ax, body.width())));
         ++t) {
        dy = pick_cell(rng, n16 - dside);
        dx = pick_cell(rng, n16 - dside);
    }
    long dvy = pick_vel_fast(rng), dvx = pick_vel_fast(rng);

    fs::create_directories(dir / "frames");
    fs::create_directories(dir / "masks_robot");
    fs::create_directories(dir / "masks_arm");
    fs::create_directories(dir / "masks_gripper");

    for (std::size_t f = 0; f < frames; ++f) {
        Image img;
        BinaryMask arm, grip;
        render(n, body, ay, ax, dy, dx, bar_x, ph, img, arm, grip);
        save_image_png(img, (dir / "frames" / frame_filename(f)).string());
        if (f == 0 || masks_every_frame) {
            BinaryMask robot(n, n);
            for (std::size_t i = 0; i < robot.data.size(); ++i) {
                robot.data[i] = (arm.data[i] || grip.data[i]) ? 1 : 0;
            }
            save_mask(robot, (dir / "masks_robot" / frame_filename(f)).string());
            save_mask(arm, (dir / "masks_arm" / frame_filename(f)).string());
            save_mask(grip, (dir / "masks_gripper" / frame_filename(f)).string());
        }
        bounce(ay, vy, 0, yhi);
        bounce(ax, vx, 0, xhi);
        bounce(dy, dvy, 0, n16 - dside);
        bounce(dx, dvx, 0, n16 - dside);
    }
}

}  // namespace

void generate_synthetic_dataset(const std::string& root, std::uint64_t seed,
                                std::size_t train_clips, std::size_t test_clips,
                                std::size_t frames_per_clip, std::size_t image_size) {
    if (image_size < 80) throw ContractError("synthetic frames need at least 80 pixels");
    if (frames_per_clip < 2) throw ContractError("clips need at least 2 frames");
    char name[32];
    for (std::size_t i = 0; i < train_clips; ++i) {
        std::mt19937_64 rng(seed * 1000003 + i);
        std::snprintf(name, sizeof(name), "clip%02zu", i);
        std::string category = i % 2 ? "rigb" : "riga";
        write_clip(fs::path(root) / "train" / category / name, category, rng, frames_per_clip,
                   image_size, false);
    }
    for (std::size_t i = 0; i < test_clips; ++i) {
        std::mt19937_64 rng(seed * 1000003 + 900000 + i);
        std::snprintf(name, sizeof(name), "clip%02zu", i);
        std::string category = i % 2 ? "rigb" : "riga";
        write_clip(fs::path(root) / "test" / category / name, category, rng, frames_per_clip,
                   image_size, true);
    }
}

}  // namespace robotseg
