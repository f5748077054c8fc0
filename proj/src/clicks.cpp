#include "robotseg/clicks.hpp"

#include <cstdint>
#include <utility>

#include "robotseg/errors.hpp"

namespace robotseg {

namespace {

// Argmax of a distance map restricted to the 1-pixels of sel; strict > keeps
// the earliest row-major winner on ties.
std::pair<std::size_t, std::size_t> peak(const Tensor& dist, const BinaryMask& sel) {
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < sel.data.size(); ++i) {
        if (sel.data[i] && dist.data()[i] > best) {
            best = dist.data()[i];
            best_i = i;
        }
    }
    return {best_i / sel.width, best_i % sel.width};
}

struct ErrorRegion {
    std::size_t size = 0;
    std::size_t first = 0;  // lowest flat index, the tie-breaker
    bool false_negative = false;
    std::vector<std::size_t> pixels;
};

// 4-connected components of the 1-pixels of err.
std::vector<ErrorRegion> components(const BinaryMask& err, bool false_negative) {
    std::vector<ErrorRegion> out;
    std::vector<std::uint8_t> seen(err.data.size(), 0);
    std::vector<std::size_t> stack;
    std::size_t h = err.height, w = err.width;
    for (std::size_t start = 0; start < err.data.size(); ++start) {
        if (!err.data[start] || seen[start]) continue;
        ErrorRegion r;
        r.first = start;
        r.false_negative = false_negative;
        stack.assign(1, start);
        seen[start] = 1;
        while (!stack.empty()) {
            std::size_t i = stack.back();
            stack.pop_back();
            r.pixels.push_back(i);
            std::size_t y = i / w, x = i % w;
            std::size_t nbr[4];
            std::size_t cnt = 0;
            if (y > 0) nbr[cnt++] = i - w;
            if (y + 1 < h) nbr[cnt++] = i + w;
            if (x > 0) nbr[cnt++] = i - 1;
            if (x + 1 < w) nbr[cnt++] = i + 1;
            for (std::size_t k = 0; k < cnt; ++k) {
                if (err.data[nbr[k]] && !seen[nbr[k]]) {
                    seen[nbr[k]] = 1;
                    stack.push_back(nbr[k]);
                }
            }
        }
        r.size = r.pixels.size();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::vector<Click> simulate_clicks(const BinaryMask& gt, const BinaryMask* pred, std::size_t n) {
    if (pred && (pred->height != gt.height || pred->width != gt.width)) {
        throw DimensionError("simulate_clicks: prediction shape differs from ground truth");
    }
    std::vector<Click> clicks;
    if (n == 0 || gt.empty_mask()) return clicks;

    auto [y0, x0] = peak(distance_transform(gt), gt);
    clicks.push_back({y0, x0, true});
    if (clicks.size() >= n) return clicks;

    BinaryMask fn(gt.height, gt.width);
    BinaryMask fp(gt.height, gt.width);
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        bool g = gt.data[i] != 0;
        bool p = pred && pred->data[i] != 0;
        fn.data[i] = (g && !p) ? 1 : 0;
        fp.data[i] = (!g && p) ? 1 : 0;
    }
    std::vector<ErrorRegion> regions = components(fn, true);
    for (ErrorRegion& r : components(fp, false)) regions.push_back(std::move(r));

    while (clicks.size() < n && !regions.empty()) {
        std::size_t pick = 0;
        for (std::size_t k = 1; k < regions.size(); ++k) {
            const ErrorRegion& a = regions[k];
            const ErrorRegion& b = regions[pick];
            if (a.size > b.size || (a.size == b.size && a.first < b.first)) pick = k;
        }
        ErrorRegion r = std::move(regions[pick]);
        regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(pick));

        BinaryMask blob(gt.height, gt.width);
        for (std::size_t i : r.pixels) blob.data[i] = 1;
        auto [y, x] = peak(distance_transform(blob), blob);
        clicks.push_back({y, x, r.false_negative});
    }
    return clicks;
}

Box simulate_bbox(const BinaryMask& gt) {
    if (gt.empty_mask()) throw ContractError("simulate_bbox: empty mask has no box");
    Box b{gt.height, gt.width, 0, 0};
    for (std::size_t y = 0; y < gt.height; ++y) {
        for (std::size_t x = 0; x < gt.width; ++x) {
            if (!gt.at(y, x)) continue;
            if (y < b.y0) b.y0 = y;
            if (x < b.x0) b.x0 = x;
            if (y > b.y1) b.y1 = y;
            if (x > b.x1) b.x1 = x;
        }
    }
    return b;
}

}  // namespace robotseg
