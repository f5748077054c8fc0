#include "robotseg/selfcheck.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <utility>

#include "robotseg/clicks.hpp"
#include "robotseg/gradcheck.hpp"
#include "robotseg/losses.hpp"
#include "robotseg/metrics.hpp"
#include "robotseg/model.hpp"
#include "robotseg/pseudo_labels.hpp"
#include "robotseg/rpg.hpp"
#include "robotseg/sema.hpp"
#include "robotseg/training.hpp"

namespace robotseg {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor rand_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = lo + (hi - lo) * unit(rng);
    return t;
}

BinaryMask rand_mask(std::size_t h, std::size_t w, std::mt19937_64& rng, double density) {
    BinaryMask m(h, w);
    for (auto& v : m.data) v = unit(rng) < density ? 1 : 0;
    return m;
}

// Independent greedy max-min selection, recomputed from scratch each pick.
std::vector<std::size_t> brute_fps(const std::vector<Point>& pts, std::size_t k) {
    std::vector<std::size_t> sel;
    if (pts.empty() || k == 0) return sel;
    sel.push_back(0);
    while (sel.size() < std::min(k, pts.size())) {
        double best = -1.0;
        std::size_t bi = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            bool taken = false;
            for (std::size_t s : sel) taken = taken || s == i;
            if (taken) continue;
            double dmin = 1e300;
            for (std::size_t s : sel) {
                double dy = static_cast<double>(pts[i].y) - static_cast<double>(pts[s].y);
                double dx = static_cast<double>(pts[i].x) - static_cast<double>(pts[s].x);
                dmin = std::min(dmin, dy * dy + dx * dx);
            }
            if (dmin > best) {
                best = dmin;
                bi = i;
            }
        }
        sel.push_back(bi);
    }
    return sel;
}

// Boundary F by direct pixel enumeration (squared-distance comparison).
double brute_boundary_f(const BinaryMask& pred, const BinaryMask& gt, std::size_t tol) {
    auto boundary = [](const BinaryMask& m) {
        std::vector<std::pair<long, long>> pts;
        for (std::size_t y = 0; y < m.height; ++y) {
            for (std::size_t x = 0; x < m.width; ++x) {
                if (!m.at(y, x)) continue;
                bool edge = y == 0 || x == 0 || y == m.height - 1 || x == m.width - 1 ||
                            !m.at(y - 1, x) || !m.at(y + 1, x) || !m.at(y, x - 1) ||
                            !m.at(y, x + 1);
                if (edge) pts.push_back({static_cast<long>(y), static_cast<long>(x)});
            }
        }
        return pts;
    };
    auto pb = boundary(pred), gb = boundary(gt);
    if (pb.empty() && gb.empty()) return 100.0;
    if (pb.empty() || gb.empty()) return 0.0;
    long t2 = static_cast<long>(tol) * static_cast<long>(tol);
    auto hits = [&](const std::vector<std::pair<long, long>>& a,
                    const std::vector<std::pair<long, long>>& b) {
        std::size_t n = 0;
        for (const auto& [ay, ax] : a) {
            long dmin = std::numeric_limits<long>::max();
            for (const auto& [by, bx] : b) {
                long dy = ay - by, dx = ax - bx;
                dmin = std::min(dmin, dy * dy + dx * dx);
            }
            if (dmin <= t2) ++n;
        }
        return n;
    };
    double p = static_cast<double>(hits(pb, gb)) / static_cast<double>(pb.size());
    double r = static_cast<double>(hits(gb, pb)) / static_cast<double>(gb.size());
    if (p + r == 0.0) return 0.0;
    return 200.0 * p * r / (p + r);
}

bool check_gradients_elementwise() {
    std::mt19937_64 rng(101);
    Tensor a = rand_tensor({3, 4}, rng, 0.5, 1.5);
    Tensor b = rand_tensor({3, 4}, rng, 0.5, 1.5);
    double err = finite_diff_check({a, b}, [&] {
        return mean(relu(a * b) + sigmoid(a) - b / (a + 3.0) + exp(a * 0.3) + log(b + 1.0));
    });
    return err < 1e-4;
}

bool check_gradients_matmul_softmax() {
    std::mt19937_64 rng(102);
    Tensor a = rand_tensor({4, 3}, rng, -1.0, 1.0);
    Tensor b = rand_tensor({3, 5}, rng, -1.0, 1.0);
    Tensor v = rand_tensor({5, 2}, rng, -1.0, 1.0);
    double err = finite_diff_check({a, b, v}, [&] {
        return sum(matmul(softmax(matmul(a, b), 1), v));
    });
    return err < 1e-4;
}

bool check_gradients_conv_stack() {
    std::mt19937_64 rng(103);
    Tensor x = rand_tensor({2, 8, 8}, rng, -1.0, 1.0);
    Tensor w = rand_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
    Tensor b = rand_tensor({3}, rng, -0.1, 0.1);
    double err = finite_diff_check({x, w, b}, [&] {
        Tensor flat = reshape(sigmoid(conv2d(x, w, b)), {24, 8});
        return mean(upsample_bilinear(avg_pool2d(flat, 2), 2));
    });
    return err < 1e-4;
}

bool check_gradients_losses() {
    std::mt19937_64 rng(104);
    Tensor logits = rand_tensor({4, 4}, rng, -2.0, 2.0);
    Tensor target({4, 4});
    for (double& v : target.data()) v = unit(rng) < 0.5 ? 0.0 : 1.0;
    double err = finite_diff_check({logits}, [&] {
        return mask_loss(sigmoid(logits), target);
    });
    return err < 1e-4;
}

bool check_fps_brute() {
    std::mt19937_64 rng(105);
    for (int run = 0; run < 20; ++run) {
        std::size_t n = 2 + rng() % 22;
        std::vector<Point> pts(n);
        for (Point& p : pts) p = {rng() % 12, rng() % 12};
        std::size_t k = 1 + rng() % 5;
        if (fps(pts, k).indices != brute_fps(pts, k)) return false;
    }
    return true;
}

bool check_kmeans_monotone() {
    std::mt19937_64 rng(106);
    for (int run = 0; run < 20; ++run) {
        std::size_t n = 4 + rng() % 30, c = 2 + rng() % 4, k = 1 + rng() % 4;
        Tensor feats = rand_tensor({n, c}, rng, -1.0, 1.0);
        Tensor init = slice_rows(feats, 0, std::min(k, n));
        ClusterResult res = kmeans(feats, init, 12);
        for (std::size_t i = 1; i < res.inertia_history.size(); ++i) {
            if (res.inertia_history[i] > res.inertia_history[i - 1] + 1e-12) return false;
        }
    }
    return true;
}

bool check_tokens_mean() {
    std::mt19937_64 rng(107);
    Tensor f = rand_tensor({1, 5, 4, 6}, rng, -1.0, 1.0);
    BinaryMask m = rand_mask(4, 6, rng, 0.5);
    if (m.empty_mask()) m.at(1, 2) = 1;
    ObjectTokens tok = object_tokens(f, {m}, 1, 1);
    for (std::size_t c = 0; c < 5; ++c) {
        double acc = 0.0;
        for (std::size_t y = 0; y < 4; ++y) {
            for (std::size_t x = 0; x < 6; ++x) {
                if (m.at(y, x)) acc += f.data()[(c * 4 + y) * 6 + x];
            }
        }
        acc /= static_cast<double>(m.count());
        if (std::fabs(tok.values.data()[c] - acc) > 1e-9) return false;
    }
    return true;
}

bool check_sema_identities() {
    std::mt19937_64 rng(108);
    Tensor f = rand_tensor({4, 3, 3}, rng, -1.0, 1.0);
    Tensor s = rand_tensor({1, 3, 3}, rng, 0.1, 0.9);
    Tensor gated = structure_modulate(f, s, Tensor::scalar(0.0));
    if (gated.data() != f.data()) return false;
    EdgeMap zero(3, 3);
    Tensor edged = edge_modulate(f, zero);
    return edged.data() == f.data();
}

bool check_metric_fixtures() {
    BinaryMask a(8, 8), b(8, 8), empty(8, 8);
    for (std::size_t y = 2; y < 6; ++y) {
        for (std::size_t x = 2; x < 6; ++x) a.at(y, x) = 1;
    }
    for (std::size_t y = 2; y < 6; ++y) {
        for (std::size_t x = 3; x < 7; ++x) b.at(y, x) = 1;  // a shifted right by 1
    }
    BinaryMask disjoint(8, 8);
    disjoint.at(0, 0) = 1;
    bool ok = jaccard(a, a) == 100.0 && boundary_f(a, a, 0) == 100.0;
    ok = ok && jaccard(a, disjoint) == 0.0;
    ok = ok && jaccard(empty, empty) == 100.0 && boundary_f(empty, empty, 2) == 100.0;
    ok = ok && boundary_f(a, empty, 2) == 0.0;
    ok = ok && boundary_f(b, a, 1) == 100.0;
    return ok;
}

bool check_metric_brute() {
    std::mt19937_64 rng(109);
    for (int run = 0; run < 10; ++run) {
        std::size_t h = 4 + rng() % 13, w = 4 + rng() % 13;
        BinaryMask p = rand_mask(h, w, rng, 0.4);
        BinaryMask g = rand_mask(h, w, rng, 0.4);
        std::size_t tol = rng() % 3;
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            inter += (p.data[i] && g.data[i]) ? 1 : 0;
            uni += (p.data[i] || g.data[i]) ? 1 : 0;
        }
        double jb = uni == 0 ? 100.0 : 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
        if (jaccard(p, g) != jb) return false;
        if (std::fabs(boundary_f(p, g, tol) - brute_boundary_f(p, g, tol)) > 1e-9) return false;
    }
    return true;
}

bool check_click_fixtures() {
    BinaryMask sq(9, 9);
    for (std::size_t y = 2; y < 7; ++y) {
        for (std::size_t x = 2; x < 7; ++x) sq.at(y, x) = 1;
    }
    std::vector<Click> first = simulate_clicks(sq, nullptr, 1);
    bool ok = first.size() == 1 && first[0].y == 4 && first[0].x == 4 && first[0].positive;
    std::vector<Click> same = simulate_clicks(sq, &sq, 3);
    ok = ok && same.size() == 1;  // no error regions left
    std::vector<Click> again = simulate_clicks(sq, nullptr, 3);
    std::vector<Click> again2 = simulate_clicks(sq, nullptr, 3);
    ok = ok && again.size() == again2.size();
    for (std::size_t i = 0; ok && i < again.size(); ++i) {
        ok = again[i].y == again2[i].y && again[i].x == again2[i].x &&
             again[i].positive == again2[i].positive;
    }
    return ok;
}

bool check_loss_closed_forms() {
    Tensor half({4, 4}, 0.5);
    Tensor ones({4, 4}, 1.0);
    double focal = focal_loss(half, ones).item();
    double dice = dice_loss(half, ones).item();
    double want_focal = 0.25 * 0.25 * std::log(2.0);
    double want_dice = 1.0 - 17.0 / 25.0;
    bool ok = std::fabs(focal - want_focal) < 1e-6 && std::fabs(dice - want_dice) < 1e-6;
    Tensor perfect = clamp(ones, 1e-6, 1.0 - 1e-6);
    ok = ok && mask_loss(perfect, ones).item() < 1e-3;
    Tensor valid({4, 4}, 1.0);
    ok = ok && soft_iou_loss(ones, ones, valid).item() == 0.0;
    return ok;
}

bool check_model_determinism() {
    ModelConfig cfg;
    cfg.channels = 8;
    cfg.decoder_masks = 2;
    cfg.memory_capacity = 2;
    cfg.rpg_regions = 2;
    cfg.rpg_subclusters = 2;
    RobotSegModel m1(cfg, 5), m2(cfg, 5);
    std::mt19937_64 rng(110);
    Image img = make_image(32, 32, 3);
    for (double& v : img.data) v = unit(rng);
    MemoryBank bank(cfg.memory_capacity);
    StepOutput a = m1.step(img, bank, TargetClass::Robot);
    StepOutput b = m2.step(img, bank, TargetClass::Robot);
    return a.probs.data() == b.probs.data() && a.iou_scores.data() == b.iou_scores.data();
}

bool check_schedule() {
    bool ok = cosine_lr(0.3, 0, 10) == 0.3 && cosine_lr(0.3, 10, 10) == 0.0 &&
              cosine_lr(0.3, 15, 10) == 0.0;
    for (std::size_t s = 1; s <= 10; ++s) ok = ok && cosine_lr(0.3, s, 10) < cosine_lr(0.3, s - 1, 10);
    return ok;
}

bool check_pseudo_identity() {
    std::mt19937_64 rng(111);
    Image frame = make_image(64, 64, 3);
    for (double& v : frame.data) v = unit(rng);
    std::vector<Image> frames(3, frame);
    BinaryMask g0(64, 64);
    for (std::size_t y = 16; y < 32; ++y) {
        for (std::size_t x = 16; x < 48; ++x) g0.at(y, x) = 1;
    }
    DescriptorProvider provider;
    PseudoLabels pl = pseudo_labels(provider, frames, g0, 0.7);
    Tensor want = downsample_mask_16(mask_to_tensor(g0));
    for (double& v : want.data()) v = v > 0.5 ? 1.0 : 0.0;
    for (std::size_t fidx = 0; fidx < 3; ++fidx) {
        if (pl.labels[fidx].data() != want.data()) return false;
        for (double v : pl.valid[fidx].data()) {
            if (v != 1.0) return false;
        }
    }
    return true;
}

}  // namespace

bool selfcheck(std::ostream& out) {
    const std::pair<const char*, bool (*)()> checks[] = {
        {"gradients: elementwise chain", check_gradients_elementwise},
        {"gradients: matmul + softmax", check_gradients_matmul_softmax},
        {"gradients: conv stack", check_gradients_conv_stack},
        {"gradients: mask loss", check_gradients_losses},
        {"clustering: farthest-point vs brute force", check_fps_brute},
        {"clustering: kmeans inertia monotone", check_kmeans_monotone},
        {"clustering: single token is foreground mean", check_tokens_mean},
        {"sema: zero-gate and zero-edge identities", check_sema_identities},
        {"metrics: fixture values", check_metric_fixtures},
        {"metrics: brute-force agreement", check_metric_brute},
        {"clicks: fixtures and determinism", check_click_fixtures},
        {"losses: closed forms", check_loss_closed_forms},
        {"model: seeded determinism", check_model_determinism},
        {"schedule: cosine endpoints", check_schedule},
        {"pseudo labels: static-clip identity", check_pseudo_identity},
    };
    std::size_t passed = 0, total = 0;
    for (const auto& [name, fn] : checks) {
        ++total;
        bool ok = false;
        try {
            ok = fn();
        } catch (const std::exception&) {
            ok = false;
        }
        passed += ok ? 1 : 0;
        out << std::left << std::setw(44) << name << (ok ? "PASS" : "FAIL") << "\n";
    }
    out << "selfcheck: " << passed << "/" << total << " passed\n";
    return passed == total;
}

}  // namespace robotseg
