#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "robotseg/imaging.hpp"
#include "robotseg/rng.hpp"

using namespace robotseg;

namespace {

// All-pairs nearest-zero distance; outside pixels count as zero.
Tensor brute_distance_transform(const BinaryMask& mask) {
    std::size_t H = mask.height, W = mask.width;
    Tensor out({H, W}, 0.0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            if (!mask.at(y, x)) continue;
            long long best = -1;
            for (long long zy = -1; zy <= static_cast<long long>(H); ++zy)
                for (long long zx = -1; zx <= static_cast<long long>(W); ++zx) {
                    bool outside = zy < 0 || zx < 0 || zy == static_cast<long long>(H) ||
                                   zx == static_cast<long long>(W);
                    bool zero = outside || !mask.at(static_cast<std::size_t>(zy),
                                                    static_cast<std::size_t>(zx));
                    if (!zero) continue;
                    long long dy = zy - static_cast<long long>(y);
                    long long dx = zx - static_cast<long long>(x);
                    long long d2 = dy * dy + dx * dx;
                    if (best < 0 || d2 < best) best = d2;
                }
            out(y, x) = std::sqrt(static_cast<double>(best));
        }
    return out;
}

BinaryMask random_mask(std::size_t H, std::size_t W, std::mt19937_64& rng, double p = 0.5) {
    BinaryMask m(H, W);
    for (auto& v : m.data) v = rng_uniform(rng) < p ? 1 : 0;
    return m;
}

Image step_image(std::size_t H, std::size_t W, std::size_t edge_col, double lo, double hi) {
    Image img = make_image(H, W, 1);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) img.at(y, x, 0) = x < edge_col ? lo : hi;
    return img;
}

// Blur + Sobel magnitude for one row, written independently of the library.
std::size_t oracle_sobel_argmax_col(const Image& gray, double sigma, std::size_t row) {
    std::size_t H = gray.height, W = gray.width;
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    auto clampi = [](long i, std::size_t n) {
        return static_cast<std::size_t>(std::min<long>(std::max<long>(i, 0), static_cast<long>(n) - 1));
    };
    std::vector<double> kern(2 * radius + 1);
    double s = 0;
    for (int i = -radius; i <= radius; ++i) {
        kern[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        s += kern[i + radius];
    }
    for (double& k : kern) k /= s;
    auto blurred = [&](long y, long x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i)
            for (int j = -radius; j <= radius; ++j)
                acc += kern[i + radius] * kern[j + radius] *
                       gray.data[clampi(y + i, H) * W + clampi(x + j, W)];
        return acc;
    };
    double best = -1;
    std::size_t best_col = 0;
    for (std::size_t x = 0; x < W; ++x) {
        long y = static_cast<long>(row), xi = static_cast<long>(x);
        double gx = blurred(y - 1, xi + 1) + 2 * blurred(y, xi + 1) + blurred(y + 1, xi + 1) -
                    blurred(y - 1, xi - 1) - 2 * blurred(y, xi - 1) - blurred(y + 1, xi - 1);
        double gy = blurred(y + 1, xi - 1) + 2 * blurred(y + 1, xi) + blurred(y + 1, xi + 1) -
                    blurred(y - 1, xi - 1) - 2 * blurred(y - 1, xi) - blurred(y - 1, xi + 1);
        double m = std::sqrt(gx * gx + gy * gy);
        if (m > best + 1e-12) {
            best = m;
            best_col = x;
        }
    }
    return best_col;
}

}  // namespace

TEST_CASE("canny on constant images is all-zero") {
    for (double v : {0.0, 0.37, 1.0}) {
        Image img = make_image(12, 9, 3, v);
        EdgeMap e = canny(img, 1.4, 0.1, 0.3);
        CHECK(e.count() == 0);
    }
}

TEST_CASE("canny threshold validation") {
    Image img = make_image(8, 8, 1, 0.5);
    CHECK_THROWS_AS(canny(img, 1.4, 0.3, 0.3), ConfigError);
    CHECK_THROWS_AS(canny(img, 1.4, 0.5, 0.2), ConfigError);
    CHECK_THROWS_AS(canny(img, 0.0, 0.1, 0.3), ConfigError);
    CHECK_THROWS_AS(canny(img, 1.4, 0.0, 0.3), ConfigError);
    CHECK_THROWS_AS(canny(img, 1.4, 0.1, 1.5), ConfigError);
}

TEST_CASE("canny vertical step matches sobel-argmax oracle") {
    Image img = step_image(16, 16, 8, 0.0, 1.0);
    EdgeMap e = canny(img, 1.4, 0.1, 0.3);
    std::size_t oracle_col = oracle_sobel_argmax_col(img, 1.4, 8);

    // Single 1-pixel-wide vertical band at the oracle column.
    for (std::size_t y = 0; y < e.height; ++y) {
        std::size_t row_count = 0;
        for (std::size_t x = 0; x < e.width; ++x)
            if (e.at(y, x)) {
                ++row_count;
                CHECK(x == oracle_col);
            }
        CHECK(row_count == 1);
    }
}

TEST_CASE("canny hysteresis drops disconnected weak segments") {
    // Strong step on the left; a much fainter step on the right whose
    // normalized magnitude lands between low and high.
    std::size_t H = 16, W = 32;
    Image img = make_image(H, W, 1, 0.0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            if (x >= 8 && x < 20) img.at(y, x, 0) = 1.0;       // strong edges near 8 and 20
            if (x >= 26) img.at(y, x, 0) = 0.15;               // weak edge near 26
        }
    EdgeMap e = canny(img, 1.4, 0.1, 0.3);
    CHECK(e.count() > 0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 22; x < W; ++x) CHECK(e.at(y, x) == 0);

    // Raising low above the weak magnitude must not change anything;
    // lowering high below it would admit the weak band as strong.
    EdgeMap e2 = canny(img, 1.4, 0.29, 0.3);
    for (std::size_t i = 0; i < e.data.size(); ++i) CHECK(e.data[i] == e2.data[i]);
}

TEST_CASE("distance transform matches brute force exactly") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 120; ++trial) {
        std::size_t H = 1 + rng_index(rng, 16);
        std::size_t W = 1 + rng_index(rng, 16);
        BinaryMask m = random_mask(H, W, rng, 0.3 + 0.5 * rng_uniform(rng));
        Tensor fast = distance_transform(m);
        Tensor slow = brute_distance_transform(m);
        for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast.data()[i] == slow.data()[i]);
    }
}

TEST_CASE("distance transform conventions") {
    BinaryMask zeros(7, 5);
    Tensor d = distance_transform(zeros);
    for (double v : d.data()) CHECK(v == 0.0);

    // Disk of radius r around a center: center value >= r.
    std::size_t n = 21, r = 6;
    BinaryMask disk(n, n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            double dy = static_cast<double>(y) - 10.0, dx = static_cast<double>(x) - 10.0;
            if (dy * dy + dx * dx <= static_cast<double>(r * r)) disk.at(y, x) = 1;
        }
    CHECK(distance_transform(disk)(10, 10) >= static_cast<double>(r));

    // All-ones mask: bounded variant sees the virtual border.
    BinaryMask ones(8, 8);
    for (auto& v : ones.data) v = 1;
    CHECK(distance_transform(ones)(0, 0) == 1.0);
    CHECK(distance_transform(ones)(4, 4) == 4.0);  // bottom border row 8 is nearest
    CHECK(std::isinf(distance_transform_unbounded(ones)(4, 4)));
}

TEST_CASE("boundary map") {
    // Solid 4x4 block inside 8x8: 12-pixel ring.
    BinaryMask m(8, 8);
    for (std::size_t y = 2; y < 6; ++y)
        for (std::size_t x = 2; x < 6; ++x) m.at(y, x) = 1;
    BinaryMask b = boundary_map(m);
    CHECK(b.count() == 12);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
            bool in_block = y >= 2 && y < 6 && x >= 2 && x < 6;
            bool interior = y >= 3 && y < 5 && x >= 3 && x < 5;
            CHECK(b.at(y, x) == (in_block && !interior ? 1 : 0));
        }

    // All-ones image: border frame only.
    BinaryMask full(6, 7);
    for (auto& v : full.data) v = 1;
    BinaryMask bf = boundary_map(full);
    CHECK(bf.count() == 2 * 6 + 2 * 7 - 4);
    CHECK(bf.at(3, 3) == 0);
    CHECK(bf.at(0, 3) == 1);

    BinaryMask empty(5, 5);
    CHECK(boundary_map(empty).count() == 0);

    // boundary_map(mask) is a subset of mask.
    std::mt19937_64 rng(7);
    BinaryMask r = random_mask(12, 12, rng);
    BinaryMask br = boundary_map(r);
    for (std::size_t i = 0; i < r.data.size(); ++i)
        if (br.data[i]) CHECK(r.data[i] == 1);
}

TEST_CASE("downsample_mask_16") {
    Tensor ones({32, 32}, 1.0);
    Tensor d = downsample_mask_16(ones);
    CHECK(d.shape() == Shape{2, 2});
    for (double v : d.data()) CHECK(v == 1.0);

    Tensor one_block({32, 32}, 0.0);
    for (std::size_t y = 16; y < 32; ++y)
        for (std::size_t x = 0; x < 16; ++x) one_block(y, x) = 1.0;
    Tensor db = downsample_mask_16(one_block);
    CHECK(db(1, 0) == 1.0);
    CHECK(db(0, 0) == 0.0);
    CHECK(db(0, 1) == 0.0);
    CHECK(db(1, 1) == 0.0);

    Tensor half({32, 32}, 0.0);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 16; ++x) half(y, x) = 1.0;
    CHECK(downsample_mask_16(half)(0, 0) == doctest::Approx(0.5));

    CHECK_THROWS_AS(downsample_mask_16(Tensor({30, 32}, 0.0)), ContractError);

    // Mass preservation on a random soft mask.
    std::mt19937_64 rng(5);
    Tensor soft({48, 32}, 0.0);
    double mass = 0.0;
    for (double& v : soft.data()) {
        v = rng_uniform(rng);
        mass += v;
    }
    Tensor ds = downsample_mask_16(soft);
    double out_mass = 0.0;
    for (double v : ds.data()) out_mass += v;
    CHECK(out_mass * 256.0 == doctest::Approx(mass).epsilon(1e-9));
}

TEST_CASE("mask png roundtrip") {
    std::mt19937_64 rng(77);
    BinaryMask m = random_mask(20, 14, rng);
    std::string path = "mask_roundtrip.png";
    save_mask(m, path);
    BinaryMask back = load_mask(path);
    REQUIRE(back.height == m.height);
    REQUIRE(back.width == m.width);
    for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(back.data[i] == m.data[i]);
    std::remove(path.c_str());
}

TEST_CASE("mask png conventions and errors") {
    // Checkerboard.
    BinaryMask cb(8, 8);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) cb.at(y, x) = static_cast<std::uint8_t>((x + y) % 2);
    save_mask(cb, "cb.png");
    BinaryMask cb2 = load_mask("cb.png");
    for (std::size_t i = 0; i < cb.data.size(); ++i) CHECK(cb2.data[i] == cb.data[i]);
    std::remove("cb.png");

    BinaryMask all(4, 4);
    for (auto& v : all.data) v = 1;
    save_mask(all, "all.png");
    CHECK(load_mask("all.png").count() == 16);
    std::remove("all.png");

    CHECK_THROWS_AS(load_mask("missing_file.png"), IoError);

    // RGB PNG is not a valid mask.
    Image rgb = make_image(4, 4, 3, 0.5);
    save_image_png(rgb, "rgb.png");
    CHECK_THROWS_AS(load_mask("rgb.png"), IoError);
    Image back = load_image("rgb.png");
    CHECK(back.channels == 3);
    CHECK(back.at(2, 2, 1) == doctest::Approx(0.5).epsilon(0.01));
    std::remove("rgb.png");
}

TEST_CASE("ppm loading") {
    {
        std::FILE* f = std::fopen("frame.ppm", "wb");
        std::fprintf(f, "P6\n# comment\n3 2\n255\n");
        unsigned char px[18];
        for (int i = 0; i < 18; ++i) px[i] = static_cast<unsigned char>(i * 10);
        std::fwrite(px, 1, 18, f);
        std::fclose(f);
    }
    Image img = load_image("frame.ppm");
    CHECK(img.height == 2);
    CHECK(img.width == 3);
    CHECK(img.channels == 3);
    CHECK(img.at(1, 2, 2) == doctest::Approx(170.0 / 255.0));
    std::remove("frame.ppm");

    {
        std::FILE* f = std::fopen("bad.ppm", "wb");
        std::fprintf(f, "P5\n3 2\n255\n");
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_image("bad.ppm"), IoError);
    std::remove("bad.ppm");
}

TEST_CASE("reflect padding") {
    Image img = make_image(20, 35, 3, 0.0);
    for (std::size_t y = 0; y < 20; ++y)
        for (std::size_t x = 0; x < 35; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img.at(y, x, c) = (y * 100.0 + x + c * 0.1) / 4000.0;
    Image padded = pad_reflect_16(img);
    CHECK(padded.height == 32);
    CHECK(padded.width == 48);
    // Original content preserved at the top-left.
    CHECK(padded.at(7, 31, 1) == img.at(7, 31, 1));
    // Bottom/right reflect: row 20 mirrors row 19, col 35 mirrors col 34.
    CHECK(padded.at(20, 3, 0) == img.at(19, 3, 0));
    CHECK(padded.at(5, 35, 2) == img.at(5, 34, 2));
    CHECK(padded.at(31, 47, 0) == img.at(8, 22, 0));

    BinaryMask m(20, 35);
    m.at(19, 34) = 1;
    BinaryMask pm = pad_reflect_16(m);
    CHECK(pm.height == 32);
    CHECK(pm.at(20, 35) == 1);
    BinaryMask cropped = crop_mask(pm, 20, 35);
    CHECK(cropped.at(19, 34) == 1);
    CHECK(cropped.count() == 1);

    Image tiny = make_image(5, 5, 1, 0.0);
    CHECK_THROWS_AS(pad_reflect_16(tiny), ContractError);
}

TEST_CASE("max_pool_binary") {
    BinaryMask m(32, 32);
    m.at(17, 3) = 1;
    BinaryMask p = max_pool_binary(m, 16);
    CHECK(p.height == 2);
    CHECK(p.at(1, 0) == 1);
    CHECK(p.at(0, 0) == 0);
    CHECK_THROWS_AS(max_pool_binary(m, 5), ContractError);
}
