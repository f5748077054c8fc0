#include "robotseg/rpg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace robotseg {

TargetClass parse_target(const std::string& name) {
    if (name == "arm") return TargetClass::Arm;
    if (name == "gripper") return TargetClass::Gripper;
    if (name == "robot") return TargetClass::Robot;
    throw ConfigError("unknown target class '" + name + "' (expected arm, gripper, or robot)");
}

std::string target_name(TargetClass target) {
    switch (target) {
        case TargetClass::Arm: return "arm";
        case TargetClass::Gripper: return "gripper";
        case TargetClass::Robot: return "robot";
    }
    throw ConfigError("invalid target class value");
}

std::vector<Point> foreground_points(const BinaryMask& mask) {
    std::vector<Point> pts;
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x)
            if (mask.at(y, x)) pts.push_back({y, x});
    return pts;
}

namespace {

std::int64_t sq_dist(const Point& a, const Point& b) {
    std::int64_t dy = static_cast<std::int64_t>(a.y) - static_cast<std::int64_t>(b.y);
    std::int64_t dx = static_cast<std::int64_t>(a.x) - static_cast<std::int64_t>(b.x);
    return dy * dy + dx * dx;
}

}  // namespace

FpsResult fps(const std::vector<Point>& points, std::size_t k) {
    if (points.empty()) throw ContractError("fps on an empty point set");
    if (k == 0) throw ContractError("fps requires k >= 1");
    FpsResult res;
    std::size_t take = std::min(k, points.size());
    res.shortfall = points.size() < k;

    std::vector<std::int64_t> min_d(points.size(), std::numeric_limits<std::int64_t>::max());
    std::size_t cur = 0;
    res.indices.push_back(cur);
    while (res.indices.size() < take) {
        std::size_t best = points.size();
        std::int64_t best_d = -1;
        for (std::size_t i = 0; i < points.size(); ++i) {
            min_d[i] = std::min(min_d[i], sq_dist(points[i], points[cur]));
            bool taken = std::find(res.indices.begin(), res.indices.end(), i) != res.indices.end();
            if (!taken && min_d[i] > best_d) {
                best_d = min_d[i];
                best = i;
            }
        }
        cur = best;
        res.indices.push_back(cur);
    }
    return res;
}

ClusterResult kmeans(const Tensor& features, const Tensor& init_centers, std::size_t max_iter) {
    if (features.rank() != 2 || init_centers.rank() != 2)
        throw DimensionError("kmeans expects [P,C] features and [k,C] centers, got " +
                             shape_str(features.shape()) + " and " + shape_str(init_centers.shape()));
    std::size_t P = features.dim(0), C = features.dim(1), k = init_centers.dim(0);
    if (init_centers.dim(1) != C)
        throw DimensionError("kmeans center width mismatch: " + shape_str(features.shape()) +
                             " vs " + shape_str(init_centers.shape()));
    if (P < k) throw ContractError("kmeans needs at least as many points as clusters");

    ClusterResult res;
    res.centers = init_centers.detach();
    res.assignments.assign(P, 0);
    const auto& fd = features.data();

    auto point_center_d2 = [&](std::size_t p, std::size_t c) {
        double s = 0.0;
        for (std::size_t j = 0; j < C; ++j) {
            double d = fd[p * C + j] - res.centers.data()[c * C + j];
            s += d * d;
        }
        return s;
    };

    auto assign_all = [&](std::vector<std::size_t>& out) {
        double inertia = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            double best = point_center_d2(p, 0);
            std::size_t best_c = 0;
            for (std::size_t c = 1; c < k; ++c) {
                double d = point_center_d2(p, c);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            out[p] = best_c;
            inertia += best;
        }
        return inertia;
    };

    std::vector<std::size_t> next(P, 0);
    for (std::size_t it = 0; it < max_iter; ++it) {
        double inertia = assign_all(next);
        res.inertia_history.push_back(inertia);

        // Reseed empty clusters at the worst-fit point (lowest index on ties).
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t c : next) ++counts[c];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            double worst = -1.0;
            std::size_t worst_p = 0;
            for (std::size_t p = 0; p < P; ++p) {
                if (counts[next[p]] <= 1) continue;  // don't empty another cluster
                double d = point_center_d2(p, next[p]);
                if (d > worst) {
                    worst = d;
                    worst_p = p;
                }
            }
            --counts[next[worst_p]];
            next[worst_p] = c;
            ++counts[c];
            for (std::size_t j = 0; j < C; ++j) res.centers.data()[c * C + j] = fd[worst_p * C + j];
        }

        bool changed = next != res.assignments;
        res.assignments = next;
        if (!changed && it > 0) break;

        // Update step: centers become cluster means.
        std::vector<double> sums(k * C, 0.0);
        std::vector<std::size_t> n(k, 0);
        for (std::size_t p = 0; p < P; ++p) {
            ++n[res.assignments[p]];
            for (std::size_t j = 0; j < C; ++j) sums[res.assignments[p] * C + j] += fd[p * C + j];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (n[c]) {
                for (std::size_t j = 0; j < C; ++j)
                    res.centers.data()[c * C + j] = sums[c * C + j] / static_cast<double>(n[c]);
            }
        if (!changed) break;
    }

    res.inertia = assign_all(res.assignments);
    return res;
}

namespace {

// Split points into assignment groups, drop empties, pad to `want` by
// repeating the last group.
std::vector<std::vector<std::size_t>> grouped_padded(const std::vector<std::size_t>& assignments,
                                                     std::size_t k, std::size_t want) {
    std::vector<std::vector<std::size_t>> groups(k);
    for (std::size_t p = 0; p < assignments.size(); ++p) groups[assignments[p]].push_back(p);
    std::vector<std::vector<std::size_t>> out;
    for (auto& g : groups)
        if (!g.empty()) out.push_back(std::move(g));
    while (out.size() < want) out.push_back(out.back());
    return out;
}

Tensor gather_rows(const Tensor& feats, const std::vector<std::size_t>& rows) {
    std::size_t C = feats.dim(1);
    Tensor out({rows.size(), C}, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < C; ++j) out(i, j) = feats(rows[i], j);
    return out;
}

}  // namespace

ObjectTokens object_tokens(const Tensor& F_pre, const std::vector<BinaryMask>& M_pre,
                           std::size_t R, std::size_t S) {
    if (F_pre.rank() != 4)
        throw DimensionError("object_tokens expects [N,C,h,w] features, got " +
                             shape_str(F_pre.shape()));
    if (R == 0 || S == 0) throw ContractError("object_tokens requires R >= 1 and S >= 1");
    std::size_t N = F_pre.dim(0), C = F_pre.dim(1), h = F_pre.dim(2), w = F_pre.dim(3);
    if (M_pre.size() != N)
        throw DimensionError("object_tokens mask count " + std::to_string(M_pre.size()) +
                             " does not match frames " + std::to_string(N));

    ObjectTokens out;
    out.values = Tensor({N, R, S * C}, 0.0);
    out.valid.assign(N, 0);

    for (std::size_t n = 0; n < N; ++n) {
        const BinaryMask& mask = M_pre[n];
        if (mask.height != h || mask.width != w)
            throw DimensionError("object_tokens mask size mismatch at frame " + std::to_string(n));
        std::vector<Point> pts = foreground_points(mask);
        if (pts.empty()) continue;  // zero tokens, valid stays 0
        out.valid[n] = 1;

        Tensor feats({pts.size(), C}, 0.0);
        for (std::size_t p = 0; p < pts.size(); ++p)
            for (std::size_t c = 0; c < C; ++c) feats(p, c) = F_pre(n, c, pts[p].y, pts[p].x);

        FpsResult macro = fps(pts, R);
        Tensor macro_init = gather_rows(feats, macro.indices);
        ClusterResult macro_cl = kmeans(feats, macro_init, 10);
        auto regions = grouped_padded(macro_cl.assignments, macro.indices.size(), R);

        for (std::size_t r = 0; r < R; ++r) {
            const auto& region = regions[r];
            std::vector<Point> rpts(region.size());
            for (std::size_t i = 0; i < region.size(); ++i) rpts[i] = pts[region[i]];
            Tensor rfeats = gather_rows(feats, region);

            FpsResult micro = fps(rpts, S);
            Tensor micro_init = gather_rows(rfeats, micro.indices);
            ClusterResult micro_cl = kmeans(rfeats, micro_init, 10);

            std::size_t k_micro = micro_cl.centers.dim(0);
            for (std::size_t s = 0; s < S; ++s) {
                std::size_t src = std::min(s, k_micro - 1);  // pad by repeating the last prototype
                for (std::size_t c = 0; c < C; ++c)
                    out.values(n, r, s * C + c) = micro_cl.centers(src, c);
            }
        }
    }
    return out;
}

Tensor class_tokens(const Tensor& bank, TargetClass target) {
    if (bank.rank() != 2 || bank.dim(0) != 3)
        throw DimensionError("token bank must be [3, d], got " + shape_str(bank.shape()));
    std::size_t row = static_cast<std::size_t>(target);
    return slice_rows(bank, row, row + 1);
}

Tensor project_tokens(const ObjectTokens& tokens, const Tensor& w, const Tensor& b) {
    std::size_t N = tokens.values.dim(0), R = tokens.values.dim(1), SC = tokens.values.dim(2);
    if (w.rank() != 2 || w.dim(0) != SC)
        throw DimensionError("project_tokens weight " + shape_str(w.shape()) +
                             " does not accept token width " + std::to_string(SC));
    Tensor flat = reshape(tokens.values.detach(), {N * R, SC});
    return matmul(flat, w) + reshape(b, {1, b.size()});
}

}  // namespace robotseg
