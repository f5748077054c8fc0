#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "robotseg/gradcheck.hpp"
#include "robotseg/rng.hpp"
#include "robotseg/rpg.hpp"

using namespace robotseg;

namespace {

// Independent greedy max-min selection, quadratic and index-tie-broken.
std::vector<std::size_t> brute_fps(const std::vector<Point>& pts, std::size_t k) {
    std::vector<std::size_t> chosen{0};
    auto d2 = [&](std::size_t a, std::size_t b) {
        double dy = static_cast<double>(pts[a].y) - static_cast<double>(pts[b].y);
        double dx = static_cast<double>(pts[a].x) - static_cast<double>(pts[b].x);
        return dy * dy + dx * dx;
    };
    while (chosen.size() < std::min(k, pts.size())) {
        double best = -1.0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
            double mind = 1e300;
            for (std::size_t c : chosen) mind = std::min(mind, d2(i, c));
            if (mind > best) {
                best = mind;
                best_i = i;
            }
        }
        chosen.push_back(best_i);
    }
    return chosen;
}

double optimal_two_cluster_inertia(const Tensor& feats) {
    std::size_t P = feats.dim(0), C = feats.dim(1);
    double best = 1e300;
    for (std::size_t code = 0; code < (1u << P); ++code) {
        std::vector<double> mean0(C, 0), mean1(C, 0);
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t p = 0; p < P; ++p) {
            bool one = (code >> p) & 1;
            for (std::size_t c = 0; c < C; ++c) (one ? mean1 : mean0)[c] += feats(p, c);
            (one ? n1 : n0)++;
        }
        if (n0 == 0 || n1 == 0) continue;
        for (std::size_t c = 0; c < C; ++c) {
            mean0[c] /= static_cast<double>(n0);
            mean1[c] /= static_cast<double>(n1);
        }
        double inertia = 0;
        for (std::size_t p = 0; p < P; ++p) {
            bool one = (code >> p) & 1;
            for (std::size_t c = 0; c < C; ++c) {
                double d = feats(p, c) - (one ? mean1 : mean0)[c];
                inertia += d * d;
            }
        }
        best = std::min(best, inertia);
    }
    return best;
}

}  // namespace

TEST_CASE("fps square corners") {
    std::vector<Point> pts{{0, 0}, {0, 10}, {10, 0}, {10, 10}};
    FpsResult r = fps(pts, 2);
    REQUIRE(r.indices.size() == 2);
    CHECK(r.indices[0] == 0);
    CHECK(r.indices[1] == 3);  // the diagonal opposite
    CHECK_FALSE(r.shortfall);
}

TEST_CASE("fps trivial cases") {
    std::vector<Point> pts{{3, 7}, {1, 1}, {9, 2}};
    FpsResult one = fps(pts, 1);
    CHECK(one.indices == std::vector<std::size_t>{0});

    FpsResult all = fps(pts, 3);
    std::set<std::size_t> uniq(all.indices.begin(), all.indices.end());
    CHECK(uniq.size() == 3);

    FpsResult shortfall = fps(pts, 5);
    CHECK(shortfall.shortfall);
    CHECK(shortfall.indices.size() == 3);

    CHECK_THROWS_AS(fps({}, 2), ContractError);
    CHECK_THROWS_AS(fps(pts, 0), ContractError);
}

TEST_CASE("fps matches brute-force greedy on random sets") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        std::size_t n = 2 + rng_index(rng, 63);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        std::vector<Point> pts;
        while (pts.size() < n) {
            Point p{rng_index(rng, 40), rng_index(rng, 40)};
            if (seen.insert({p.y, p.x}).second) pts.push_back(p);
        }
        std::size_t k = 1 + rng_index(rng, n);
        FpsResult r = fps(pts, k);
        CHECK(r.indices == brute_fps(pts, k));
    }
}

TEST_CASE("kmeans blob separation matches optimal 2-clustering") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t P = 6 + rng_index(rng, 6);  // <= 11 points, exhaustive oracle
        Tensor feats({P, 2}, 0.0);
        for (std::size_t p = 0; p < P; ++p) {
            double base = p < P / 2 ? 0.0 : 20.0;
            feats(p, 0) = base + rng_uniform(rng, -1, 1);
            feats(p, 1) = base + rng_uniform(rng, -1, 1);
        }
        Tensor init({2, 2}, 0.0);
        init(0, 0) = feats(0, 0);
        init(0, 1) = feats(0, 1);
        init(1, 0) = feats(P - 1, 0);
        init(1, 1) = feats(P - 1, 1);
        ClusterResult r = kmeans(feats, init, 10);
        // Blob split.
        for (std::size_t p = 1; p < P / 2; ++p) CHECK(r.assignments[p] == r.assignments[0]);
        for (std::size_t p = P / 2; p < P; ++p) CHECK(r.assignments[p] == r.assignments[P - 1]);
        CHECK(r.assignments[0] != r.assignments[P - 1]);
        CHECK(r.inertia == doctest::Approx(optimal_two_cluster_inertia(feats)).epsilon(1e-9));
    }
}

TEST_CASE("kmeans k=1 is the mean") {
    Tensor feats({4, 3}, {1, 2, 3, 5, 6, 7, 9, 10, 11, 13, 14, 15});
    Tensor init({1, 3}, {100.0, 100.0, 100.0});
    ClusterResult r = kmeans(feats, init, 10);
    CHECK(r.centers(0, 0) == doctest::Approx(7.0));
    CHECK(r.centers(0, 1) == doctest::Approx(8.0));
    CHECK(r.centers(0, 2) == doctest::Approx(9.0));
    for (std::size_t a : r.assignments) CHECK(a == 0);
}

TEST_CASE("kmeans inertia is monotone and assignments are nearest-center") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 15; ++trial) {
        std::size_t P = 8 + rng_index(rng, 24);
        std::size_t k = 1 + rng_index(rng, 4);
        if (k > P) k = P;
        Tensor feats({P, 3}, 0.0);
        for (double& v : feats.data()) v = rng_uniform(rng, -5, 5);
        Tensor init({k, 3}, 0.0);
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < 3; ++j) init(c, j) = feats(c, j);
        ClusterResult r = kmeans(feats, init, 10);
        for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
            CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-9);
        // Nearest-center postcondition.
        for (std::size_t p = 0; p < P; ++p) {
            double assigned = 0, best = 1e300;
            for (std::size_t c = 0; c < k; ++c) {
                double d = 0;
                for (std::size_t j = 0; j < 3; ++j) {
                    double diff = feats(p, j) - r.centers(c, j);
                    d += diff * diff;
                }
                if (c == r.assignments[p]) assigned = d;
                best = std::min(best, d);
            }
            CHECK(assigned == doctest::Approx(best));
        }
    }
    CHECK_THROWS_AS(kmeans(Tensor({2, 3}, 0.0), Tensor({4, 3}, 0.0), 5), ContractError);
    CHECK_THROWS_AS(kmeans(Tensor({4, 3}, 0.0), Tensor({2, 2}, 0.0), 5), DimensionError);
}

TEST_CASE("object_tokens shape and R=1 S=1 mean") {
    std::size_t N = 2, C = 3, h = 4, w = 4;
    Tensor F({N, C, h, w}, 0.0);
    std::mt19937_64 rng(5);
    for (double& v : F.data()) v = rng_uniform(rng);
    std::vector<BinaryMask> masks(N, BinaryMask(h, w));
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 3; ++x) masks[0].at(y, x) = 1;
    masks[1].at(3, 3) = 1;

    ObjectTokens t = object_tokens(F, masks, 1, 1);
    CHECK(t.values.shape() == Shape{2, 1, 3});
    CHECK(t.valid[0] == 1);
    CHECK(t.valid[1] == 1);
    for (std::size_t c = 0; c < C; ++c) {
        double mean = 0;
        for (std::size_t y = 0; y < 2; ++y)
            for (std::size_t x = 0; x < 3; ++x) mean += F(0, c, y, x);
        mean /= 6.0;
        CHECK(t.values(0, 0, c) == doctest::Approx(mean));
        CHECK(t.values(1, 0, c) == doctest::Approx(F(1, c, 3, 3)));
    }
}

TEST_CASE("object_tokens degenerate and empty frames") {
    std::size_t N = 3, C = 2, h = 4, w = 4;
    Tensor F({N, C, h, w}, 1.5);
    std::vector<BinaryMask> masks(N, BinaryMask(h, w));
    masks[0].at(1, 1) = 1;  // single pixel, R=4 S=4 forces the padding path
    // masks[1] empty
    for (auto& v : masks[2].data) v = 1;

    ObjectTokens t = object_tokens(F, masks, 4, 4);
    CHECK(t.values.shape() == Shape{3, 4, 8});
    CHECK(t.valid[0] == 1);
    CHECK(t.valid[1] == 0);
    CHECK(t.valid[2] == 1);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(t.values(0, r, j) == 1.5);  // padded from the single pixel
            CHECK(t.values(1, r, j) == 0.0);  // empty frame stays zero
        }
}

TEST_CASE("object_tokens recovers well-separated constant blobs") {
    // 16x16 foreground split into 4 spatial quadrants (macro regions) of 4
    // sub-blobs each; features constant per sub-blob, far apart across
    // quadrants, distinct within.
    std::size_t C = 2, h = 16, w = 16;
    Tensor F({1, C, h, w}, 0.0);
    BinaryMask mask(h, w);
    auto blob_value = [](std::size_t q, std::size_t s, std::size_t c) {
        return 100.0 * static_cast<double>(q) + 3.0 * static_cast<double>(s) +
               static_cast<double>(c);
    };
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            std::size_t q = (y / 8) * 2 + (x / 8);
            std::size_t s = ((y % 8) / 4) * 2 + ((x % 8) / 4);
            mask.at(y, x) = 1;
            for (std::size_t c = 0; c < C; ++c) F(0, c, y, x) = blob_value(q, s, c);
        }

    ObjectTokens t = object_tokens(F, {mask}, 4, 4);
    REQUIRE(t.values.shape() == Shape{1, 4, 4 * C});

    // Every macro region must hold exactly one quadrant's four blob values.
    std::set<std::size_t> quadrants_seen;
    for (std::size_t r = 0; r < 4; ++r) {
        std::size_t q = static_cast<std::size_t>(t.values(0, r, 0) / 100.0 + 0.5);
        quadrants_seen.insert(q);
        std::set<int> subs;
        for (std::size_t s = 0; s < 4; ++s) {
            double v0 = t.values(0, r, s * C + 0);
            double v1 = t.values(0, r, s * C + 1);
            bool matched = false;
            for (std::size_t sb = 0; sb < 4; ++sb)
                if (v0 == doctest::Approx(blob_value(q, sb, 0)) &&
                    v1 == doctest::Approx(blob_value(q, sb, 1))) {
                    subs.insert(static_cast<int>(sb));
                    matched = true;
                }
            CHECK(matched);
        }
        CHECK(subs.size() == 4);  // all four sub-blobs present, any order
    }
    CHECK(quadrants_seen.size() == 4);
}

TEST_CASE("object_tokens is permutation-covariant over frames") {
    std::size_t N = 3, C = 2, h = 8, w = 8;
    std::mt19937_64 rng(77);
    Tensor F({N, C, h, w}, 0.0);
    for (double& v : F.data()) v = rng_uniform(rng, -3, 3);
    std::vector<BinaryMask> masks;
    for (std::size_t n = 0; n < N; ++n) {
        BinaryMask m(h, w);
        for (auto& v : m.data) v = rng_uniform(rng) < 0.6 ? 1 : 0;
        m.at(n, n) = 1;  // ensure non-empty
        masks.push_back(m);
    }
    ObjectTokens base = object_tokens(F, masks, 3, 2);

    std::vector<std::size_t> perm{2, 0, 1};
    Tensor Fp({N, C, h, w}, 0.0);
    std::vector<BinaryMask> masks_p(N);
    for (std::size_t n = 0; n < N; ++n) {
        masks_p[n] = masks[perm[n]];
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) Fp(n, c, y, x) = F(perm[n], c, y, x);
    }
    ObjectTokens permuted = object_tokens(Fp, masks_p, 3, 2);
    for (std::size_t n = 0; n < N; ++n) {
        CHECK(permuted.valid[n] == base.valid[perm[n]]);
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t j = 0; j < 2 * C; ++j)
                CHECK(permuted.values(n, r, j) == base.values(perm[n], r, j));
    }
}

TEST_CASE("class_tokens selects bank rows") {
    Tensor bank({3, 4}, 0.0);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c) bank(r, c) = 10.0 * static_cast<double>(r) + static_cast<double>(c);
    Tensor robot = class_tokens(bank, TargetClass::Robot);
    CHECK(robot.shape() == Shape{1, 4});
    CHECK(robot(0, 0) == 20.0);
    Tensor arm = class_tokens(bank, TargetClass::Arm);
    CHECK(arm(0, 0) == 0.0);
    Tensor arm2 = class_tokens(bank, TargetClass::Arm);
    for (std::size_t c = 0; c < 4; ++c) CHECK(arm(0, c) == arm2(0, c));
    CHECK_THROWS_AS(class_tokens(Tensor({2, 4}, 0.0), TargetClass::Arm), DimensionError);

    CHECK(parse_target("robot") == TargetClass::Robot);
    CHECK(parse_target("arm") == TargetClass::Arm);
    CHECK(parse_target("gripper") == TargetClass::Gripper);
    CHECK_THROWS_AS(parse_target("wheel"), ConfigError);
    CHECK(target_name(TargetClass::Gripper) == "gripper");
}

TEST_CASE("project_tokens shape, zero input, gradient") {
    std::mt19937_64 rng(55);
    std::size_t N = 2, R = 4, SC = 6, d = 3;
    ObjectTokens toks;
    toks.values = Tensor({N, R, SC}, 0.0);
    toks.valid.assign(N, 1);
    Tensor w({SC, d}, 0.0);
    Tensor b({d}, {0.5, -1.0, 2.0});
    for (double& v : w.data()) v = rng_uniform(rng, -1, 1);

    Tensor zero_out = project_tokens(toks, w, b);
    CHECK(zero_out.shape() == Shape{N * R, d});
    for (std::size_t i = 0; i < N * R; ++i)
        for (std::size_t j = 0; j < d; ++j) CHECK(zero_out(i, j) == b(j));

    for (double& v : toks.values.data()) v = rng_uniform(rng, -1, 1);
    Tensor probe({N * R, d}, 0.0);
    for (double& v : probe.data()) v = rng_uniform(rng, -1, 1);
    double err = finite_diff_check({w, b}, [&] { return sum(project_tokens(toks, w, b) * probe); });
    CHECK(err < 1e-5);

    CHECK_THROWS_AS(project_tokens(toks, Tensor({SC + 1, d}, 0.0), b), DimensionError);
}
