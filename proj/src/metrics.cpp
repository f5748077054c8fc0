#include "robotseg/metrics.hpp"

#include <cmath>

#include "robotseg/errors.hpp"

namespace robotseg {

std::size_t boundary_tolerance(std::size_t h, std::size_t w, double factor) {
    double diag = std::sqrt(static_cast<double>(h) * static_cast<double>(h) +
                            static_cast<double>(w) * static_cast<double>(w));
    return static_cast<std::size_t>(std::ceil(factor * diag));
}

double jaccard(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width) {
        throw DimensionError("jaccard: mask shapes differ");
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        bool p = pred.data[i] != 0;
        bool g = gt.data[i] != 0;
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    if (uni == 0) return 100.0;
    return 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Distance from every pixel to the nearest 1-pixel of b, without the frame
// border acting as background.
Tensor distance_to_set(const BinaryMask& b) {
    BinaryMask inv(b.height, b.width);
    for (std::size_t i = 0; i < b.data.size(); ++i) inv.data[i] = b.data[i] ? 0 : 1;
    return distance_transform_unbounded(inv);
}

}  // namespace

double boundary_f(const BinaryMask& pred, const BinaryMask& gt, std::size_t tol) {
    if (pred.height != gt.height || pred.width != gt.width) {
        throw DimensionError("boundary_f: mask shapes differ");
    }
    BinaryMask pb = boundary_map(pred);
    BinaryMask gb = boundary_map(gt);
    std::size_t np = pb.count(), ng = gb.count();
    if (np == 0 && ng == 0) return 100.0;
    if (np == 0 || ng == 0) return 0.0;

    Tensor dist_gt = distance_to_set(gb);
    Tensor dist_pred = distance_to_set(pb);
    double reach = static_cast<double>(tol);

    std::size_t hit_p = 0, hit_g = 0;
    for (std::size_t i = 0; i < pb.data.size(); ++i) {
        if (pb.data[i] && dist_gt.data()[i] <= reach) ++hit_p;
        if (gb.data[i] && dist_pred.data()[i] <= reach) ++hit_g;
    }
    double precision = static_cast<double>(hit_p) / static_cast<double>(np);
    double recall = static_cast<double>(hit_g) / static_cast<double>(ng);
    if (precision + recall == 0.0) return 0.0;
    return 200.0 * precision * recall / (precision + recall);
}

VideoMetrics jf_video(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts,
                      std::size_t tol) {
    if (preds.size() != gts.size()) {
        throw ContractError("jf_video: prediction and ground-truth counts differ");
    }
    if (preds.empty()) throw ContractError("jf_video: no frames");
    VideoMetrics m;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        m.j += jaccard(preds[i], gts[i]);
        m.f += boundary_f(preds[i], gts[i], tol);
    }
    double n = static_cast<double>(preds.size());
    m.j /= n;
    m.f /= n;
    m.jf = 0.5 * (m.j + m.f);
    return m;
}

}  // namespace robotseg
