#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "robotseg/gradcheck.hpp"
#include "robotseg/rng.hpp"
#include "robotseg/sema.hpp"

using namespace robotseg;

namespace {

Tensor random_grid(std::mt19937_64& rng, std::size_t c, std::size_t h, std::size_t w) {
    Tensor t({c, h, w}, 0.0);
    for (double& v : t.data()) v = rng_uniform(rng, -1.0, 1.0);
    return t;
}

MemoryEntry entry_of(Tensor grid, std::size_t frame) {
    MemoryEntry e;
    e.mask = BinaryMask(grid.dim(1), grid.dim(2));
    e.feature = std::move(grid);
    e.source_frame = frame;
    return e;
}

struct SemaFixture {
    ParamRegistry reg;
    SemaParams p;
    SemaFixture(std::size_t c, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        p = make_sema_params(reg, c, rng);
    }
    void zero_all() {
        for (auto& [name, t] : reg.all())
            for (double& v : t.data()) v = 0.0;
    }
};

}  // namespace

TEST_CASE("temporal association keeps the grid shape") {
    SemaFixture fx(8, 1);
    std::mt19937_64 rng(2);
    Tensor f = random_grid(rng, 8, 4, 3);
    MemoryBank bank(4);
    bank.push(entry_of(random_grid(rng, 8, 2, 2), 0));
    bank.push(entry_of(random_grid(rng, 8, 1, 3), 1));  // entry sizes may differ

    Tensor out = temporal_associate(f, bank, fx.p);
    REQUIRE(out.shape() == Shape{8, 4, 3});
    for (double v : out.data()) CHECK(std::isfinite(v));

    MemoryBank empty(4);
    CHECK_THROWS_AS(temporal_associate(f, empty, fx.p), ContractError);
}

TEST_CASE("zeroed weights make association the identity") {
    SemaFixture fx(4, 3);
    fx.zero_all();
    std::mt19937_64 rng(4);
    Tensor f = random_grid(rng, 4, 3, 5);
    MemoryBank bank(4);
    bank.push(entry_of(random_grid(rng, 4, 3, 5), 0));

    Tensor out = temporal_associate(f, bank, fx.p);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.at(i) == f.at(i));
}

TEST_CASE("association gradients reach the frame and the oldest bank entry") {
    SemaFixture fx(2, 5);
    std::mt19937_64 rng(6);
    Tensor f = random_grid(rng, 2, 2, 2);
    Tensor oldest = random_grid(rng, 2, 2, 2);
    Tensor newer = random_grid(rng, 2, 2, 2);
    MemoryBank bank(4);
    bank.push(entry_of(oldest, 0));  // Tensor copies share storage
    bank.push(entry_of(newer, 1));

    auto loss = [&] { return sum(temporal_associate(f, bank, fx.p)); };
    CHECK(finite_diff_check({f, oldest}, loss) < 1e-4);
    CHECK(finite_diff_check({fx.p.assoc_cross.wq, fx.p.mlp_w1, fx.p.mlp_b2}, loss) < 1e-4);
}

TEST_CASE("edge modulation") {
    std::mt19937_64 rng(7);
    Tensor f = random_grid(rng, 3, 4, 4);

    SUBCASE("zero map is the identity") {
        EdgeMap e(4, 4);
        Tensor out = edge_modulate(f, e);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.at(i) == f.at(i));
    }
    SUBCASE("full map doubles every value") {
        EdgeMap e(4, 4);
        e.data.assign(16, 1);
        Tensor out = edge_modulate(f, e);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.at(i) == 2.0 * f.at(i));
    }
    SUBCASE("single edge pixel doubles one column across channels") {
        EdgeMap e(4, 4);
        e.at(1, 2) = 1;
        Tensor out = edge_modulate(f, e);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t x = 0; x < 4; ++x) {
                    double want = (y == 1 && x == 2) ? 2.0 * f(c, y, x) : f(c, y, x);
                    CHECK(out(c, y, x) == want);
                }
    }
    SUBCASE("size mismatch is rejected") {
        EdgeMap e(4, 5);
        CHECK_THROWS_AS(edge_modulate(f, e), DimensionError);
    }
}

TEST_CASE("multiscale mixing") {
    SemaFixture fx(2, 8);
    std::mt19937_64 rng(9);

    SUBCASE("delta kernel at scale 3 reproduces the input") {
        fx.zero_all();
        for (std::size_t c = 0; c < 2; ++c) fx.p.k3(c, 1, 1) = 1.0;
        fx.p.mix3.data().assign(2, 1.0);
        Tensor f = random_grid(rng, 2, 5, 4);
        Tensor out = multiscale(f, fx.p);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.at(i) == f.at(i));
    }
    SUBCASE("box kernel sums the window on a constant image") {
        fx.zero_all();
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t i = 0; i < 9; ++i) fx.p.k3(c, i / 3, i % 3) = 1.0;
        fx.p.mix3(0) = 1.0;
        fx.p.mix3(1) = 0.5;
        Tensor f({2, 4, 4}, 3.0);
        Tensor out = multiscale(f, fx.p);
        // interior: 9 taps of 3.0; a corner only sees 4 (zero padding)
        CHECK(out(0, 1, 1) == doctest::Approx(27.0));
        CHECK(out(1, 2, 2) == doctest::Approx(13.5));
        CHECK(out(0, 0, 0) == doctest::Approx(12.0));
    }
    SUBCASE("gradients flow to every kernel and mix weight") {
        Tensor f = random_grid(rng, 2, 6, 6);
        auto loss = [&] { return sum(multiscale(f, fx.p)); };
        CHECK(finite_diff_check({f, fx.p.k3, fx.p.k5, fx.p.k7}, loss) < 1e-4);
        CHECK(finite_diff_check({fx.p.mix3, fx.p.mix5, fx.p.mix7}, loss) < 1e-4);
    }
}

TEST_CASE("structure map stays a probability grid") {
    SemaFixture fx(4, 10);
    std::mt19937_64 rng(11);
    Tensor f = random_grid(rng, 4, 3, 4);

    for (std::size_t n : {1u, 3u}) {
        MemoryBank bank(4);
        for (std::size_t i = 0; i < n; ++i) bank.push(entry_of(random_grid(rng, 4, 2, 2), i));
        Tensor s = structure_map(f, bank, fx.p);
        REQUIRE(s.shape() == Shape{1, 3, 4});
        for (double v : s.data()) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }

    MemoryBank bank(4);
    bank.push(entry_of(random_grid(rng, 4, 2, 2), 0));
    auto loss = [&] { return sum(structure_map(f, bank, fx.p)); };
    CHECK(finite_diff_check({f, fx.p.struct_conv_w, fx.p.struct_conv_b}, loss) < 1e-4);
}

TEST_CASE("structure modulation") {
    std::mt19937_64 rng(12);
    Tensor f = random_grid(rng, 3, 3, 3);
    Tensor s({1, 3, 3}, 0.5);

    SUBCASE("zero gate is exactly the identity") {
        Tensor alpha = Tensor::scalar(0.0);
        Tensor out = structure_modulate(f, s, alpha);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.at(i) == f.at(i));
    }
    SUBCASE("unit gate over a half map scales by 1.5") {
        Tensor alpha = Tensor::scalar(1.0);
        Tensor out = structure_modulate(f, s, alpha);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.at(i) == 1.5 * f.at(i));
    }
    SUBCASE("gradient through the gate") {
        Tensor alpha = Tensor::scalar(0.3);
        auto loss = [&] { return sum(structure_modulate(f, s, alpha)); };
        CHECK(finite_diff_check({alpha, f}, loss) < 1e-5);
    }
    SUBCASE("map must match the grid") {
        Tensor bad({1, 3, 4}, 0.5);
        CHECK_THROWS_AS(structure_modulate(f, bad, Tensor::scalar(0.0)), DimensionError);
    }
}

TEST_CASE("structure loss") {
    // 32x32 mask with a filled square: target is its boundary, pooled to 2x2.
    BinaryMask gt(32, 32);
    for (std::size_t y = 8; y < 24; ++y)
        for (std::size_t x = 8; x < 24; ++x) gt.at(y, x) = 1;
    BinaryMask target = max_pool_binary(boundary_map(gt), 16);

    SUBCASE("near-perfect map scores near zero") {
        Tensor s({1, 2, 2}, 0.0);
        for (std::size_t i = 0; i < 4; ++i) s.at(i) = target.data[i] ? 1.0 - 1e-9 : 1e-9;
        CHECK(structure_loss(s, gt).item() < 1e-4);
    }
    SUBCASE("uniform half map scores ln 2") {
        Tensor s({1, 2, 2}, 0.5);
        CHECK(structure_loss(s, gt).item() == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("gradient wrt the map") {
        std::mt19937_64 rng(13);
        Tensor s({1, 2, 2}, 0.0);
        for (double& v : s.data()) v = rng_uniform(rng, 0.2, 0.8);
        auto loss = [&] { return structure_loss(s, gt); };
        CHECK(finite_diff_check({s}, loss) < 1e-4);
    }
    SUBCASE("mask larger than the padded grid is rejected") {
        BinaryMask big(33, 33);
        Tensor s({1, 2, 2}, 0.5);
        CHECK_THROWS_AS(structure_loss(s, big), DimensionError);
    }
    SUBCASE("smaller mask is zero-extended") {
        BinaryMask small(20, 26);  // fits the 32x32 padded grid
        Tensor s({1, 2, 2}, 0.5);
        CHECK(structure_loss(s, small).item() == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
}

TEST_CASE("full pipeline") {
    SemaFixture fx(4, 14);
    std::mt19937_64 rng(15);
    Tensor f = random_grid(rng, 4, 2, 2);
    MemoryBank bank(4);
    bank.push(entry_of(random_grid(rng, 4, 2, 2), 0));
    EdgeMap e(2, 2);  // edge maps arrive already pooled to the patch grid
    e.at(0, 1) = 1;

    SUBCASE("zero gate leaves the associated features untouched") {
        Tensor s;
        Tensor out = sema_forward(f, bank, e, fx.p, &s);
        Tensor assoc = temporal_associate(f, bank, fx.p);
        REQUIRE(fx.p.alpha.item() == 0.0);  // fresh parameters
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.at(i) == assoc.at(i));
        REQUIRE(s.shape() == Shape{1, 2, 2});
    }
    SUBCASE("edge map must match the patch grid") {
        EdgeMap bad(1, 2);
        CHECK_THROWS_AS(sema_forward(f, bank, bad, fx.p), DimensionError);
    }
    SUBCASE("gradients survive the whole stack") {
        fx.p.alpha.data()[0] = 0.2;  // open the gate so the structure path matters
        auto loss = [&] { return sum(sema_forward(f, bank, e, fx.p)); };
        CHECK(finite_diff_check({f, fx.p.alpha, fx.p.k5, fx.p.struct_conv_w}, loss, 1e-5, 40,
                                999) < 1e-4);
    }
}
