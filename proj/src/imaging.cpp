#include "robotseg/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace robotseg {

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += v;
    return n;
}

Image make_image(std::size_t h, std::size_t w, std::size_t channels, double fill) {
    if (channels != 1 && channels != 3) throw ContractError("image channels must be 1 or 3");
    Image img;
    img.height = h;
    img.width = w;
    img.channels = channels;
    img.data.assign(h * w * channels, fill);
    return img;
}

Image rgb_to_luma(const Image& img) {
    if (img.channels == 1) return img;
    Image out = make_image(img.height, img.width, 1);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            out.at(y, x, 0) =
                0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
    return out;
}

namespace {

std::size_t clamp_idx(std::ptrdiff_t i, std::size_t n) {
    if (i < 0) return 0;
    if (i >= static_cast<std::ptrdiff_t>(n)) return n - 1;
    return static_cast<std::size_t>(i);
}

// Separable Gaussian with replicated borders.
std::vector<double> gaussian_blur(const std::vector<double>& in, std::size_t H, std::size_t W,
                                  double sigma) {
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    std::vector<double> tmp(H * W), out(H * W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += kernel[i + radius] * in[y * W + clamp_idx(static_cast<std::ptrdiff_t>(x) + i, W)];
            tmp[y * W + x] = s;
        }
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += kernel[i + radius] * tmp[clamp_idx(static_cast<std::ptrdiff_t>(y) + i, H) * W + x];
            out[y * W + x] = s;
        }
    return out;
}

}  // namespace

EdgeMap canny(const Image& img, double sigma, double low, double high) {
    if (sigma <= 0.0) throw ConfigError("canny sigma must be positive");
    if (!(0.0 < low && low < high && high <= 1.0))
        throw ConfigError("canny thresholds must satisfy 0 < low < high <= 1");

    Image gray = rgb_to_luma(img);
    std::size_t H = gray.height, W = gray.width;
    EdgeMap out(H, W);
    if (H < 2 || W < 2) return out;

    std::vector<double> sm = gaussian_blur(gray.data, H, W, sigma);

    std::vector<double> gx(H * W), gy(H * W), mag(H * W);
    auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
        return sm[clamp_idx(y, H) * W + clamp_idx(x, W)];
    };
    double max_mag = 0.0;
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(y);
            std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(x);
            double dx = px(yi - 1, xi + 1) + 2 * px(yi, xi + 1) + px(yi + 1, xi + 1) -
                        px(yi - 1, xi - 1) - 2 * px(yi, xi - 1) - px(yi + 1, xi - 1);
            double dy = px(yi + 1, xi - 1) + 2 * px(yi + 1, xi) + px(yi + 1, xi + 1) -
                        px(yi - 1, xi - 1) - 2 * px(yi - 1, xi) - px(yi - 1, xi + 1);
            gx[y * W + x] = dx;
            gy[y * W + x] = dy;
            mag[y * W + x] = std::sqrt(dx * dx + dy * dy);
            max_mag = std::max(max_mag, mag[y * W + x]);
        }
    // Floor guards against rounding residue on (near-)constant images, where
    // normalizing by a ~1e-16 max would promote noise to full-strength edges.
    if (max_mag < 1e-12) return out;
    for (double& m : mag) m /= max_mag;

    // Non-maximum suppression along the quantized gradient direction. Ties are
    // broken toward the lower row-major pixel: a pixel survives an equal
    // earlier neighbor never, an equal later neighbor always.
    std::vector<std::uint8_t> nms(H * W, 0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            double m = mag[y * W + x];
            if (m == 0.0) continue;
            double ang = std::atan2(gy[y * W + x], gx[y * W + x]);
            if (ang < 0) ang += M_PI;
            int dy8, dx8;  // neighbor offset for the quantized direction
            if (ang < M_PI / 8 || ang >= 7 * M_PI / 8) {
                dy8 = 0;
                dx8 = 1;
            } else if (ang < 3 * M_PI / 8) {
                dy8 = 1;
                dx8 = 1;
            } else if (ang < 5 * M_PI / 8) {
                dy8 = 1;
                dx8 = 0;
            } else {
                dy8 = 1;
                dx8 = -1;
            }
            auto at = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
                if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H) || xx < 0 ||
                    xx >= static_cast<std::ptrdiff_t>(W))
                    return 0.0;
                return mag[static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx)];
            };
            // (dy8, dx8) always points to the later row-major neighbor.
            double later = at(static_cast<std::ptrdiff_t>(y) + dy8, static_cast<std::ptrdiff_t>(x) + dx8);
            double earlier = at(static_cast<std::ptrdiff_t>(y) - dy8, static_cast<std::ptrdiff_t>(x) - dx8);
            if (m > earlier && m >= later) nms[y * W + x] = 1;
        }

    // Hysteresis: seed from strong pixels, grow through weak ones (8-conn).
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < H * W; ++i)
        if (nms[i] && mag[i] >= high) {
            out.data[i] = 1;
            queue.push_back(i);
        }
    while (!queue.empty()) {
        std::size_t i = queue.front();
        queue.pop_front();
        std::size_t y = i / W, x = i % W;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
                std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
                if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H) || xx < 0 ||
                    xx >= static_cast<std::ptrdiff_t>(W))
                    continue;
                std::size_t j = static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx);
                if (!out.data[j] && nms[j] && mag[j] >= low) {
                    out.data[j] = 1;
                    queue.push_back(j);
                }
            }
    }
    return out;
}

namespace {

constexpr std::int64_t kFar = std::numeric_limits<std::int64_t>::max() / 4;

// Two-pass exact squared EDT. `bordered` adds virtual zeros outside the image.
std::vector<std::int64_t> edt_squared(const BinaryMask& mask, bool bordered) {
    std::size_t H = mask.height, W = mask.width;
    // Row pass: horizontal distance to the nearest in-row zero (and border).
    std::vector<std::int64_t> g(H * W, kFar);
    for (std::size_t y = 0; y < H; ++y) {
        std::int64_t d = bordered ? 0 : kFar;  // virtual zero just outside the row
        for (std::size_t x = 0; x < W; ++x) {
            if (!mask.at(y, x))
                d = 0;
            else if (d < kFar)
                ++d;
            g[y * W + x] = d;
        }
        d = bordered ? 0 : kFar;
        for (std::size_t x = W; x-- > 0;) {
            if (!mask.at(y, x))
                d = 0;
            else if (d < kFar)
                ++d;
            g[y * W + x] = std::min(g[y * W + x], d);
        }
    }
    // Column pass: combine with vertical offsets (and virtual border rows).
    std::vector<std::int64_t> d2(H * W, kFar);
    for (std::size_t x = 0; x < W; ++x)
        for (std::size_t y = 0; y < H; ++y) {
            std::int64_t best = kFar;
            for (std::size_t yp = 0; yp < H; ++yp) {
                std::int64_t gv = g[yp * W + x];
                if (gv >= kFar) continue;
                std::int64_t dy = static_cast<std::int64_t>(y) - static_cast<std::int64_t>(yp);
                best = std::min(best, gv * gv + dy * dy);
            }
            if (bordered) {
                std::int64_t up = static_cast<std::int64_t>(y) + 1;
                std::int64_t down = static_cast<std::int64_t>(H - y);
                best = std::min({best, up * up, down * down});
            }
            d2[y * W + x] = best;
        }
    return d2;
}

Tensor edt_to_tensor(const std::vector<std::int64_t>& d2, std::size_t H, std::size_t W) {
    Tensor out({H, W}, 0.0);
    for (std::size_t i = 0; i < H * W; ++i)
        out.data()[i] = d2[i] >= kFar ? std::numeric_limits<double>::infinity()
                                      : std::sqrt(static_cast<double>(d2[i]));
    return out;
}

}  // namespace

Tensor distance_transform(const BinaryMask& mask) {
    return edt_to_tensor(edt_squared(mask, true), mask.height, mask.width);
}

Tensor distance_transform_unbounded(const BinaryMask& mask) {
    return edt_to_tensor(edt_squared(mask, false), mask.height, mask.width);
}

BinaryMask boundary_map(const BinaryMask& mask) {
    std::size_t H = mask.height, W = mask.width;
    BinaryMask out(H, W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            if (!mask.at(y, x)) continue;
            bool edge = y == 0 || x == 0 || y == H - 1 || x == W - 1 || !mask.at(y - 1, x) ||
                        !mask.at(y + 1, x) || !mask.at(y, x - 1) || !mask.at(y, x + 1);
            out.at(y, x) = edge ? 1 : 0;
        }
    return out;
}

Tensor downsample_mask_16(const Tensor& soft_mask) {
    if (soft_mask.rank() != 2)
        throw ContractError("downsample_mask_16 expects a 2-D mask, got " +
                            shape_str(soft_mask.shape()));
    if (soft_mask.dim(0) % 16 != 0 || soft_mask.dim(1) % 16 != 0)
        throw ContractError("downsample_mask_16 needs dims divisible by 16, got " +
                            shape_str(soft_mask.shape()));
    return avg_pool2d(soft_mask, 16);
}

BinaryMask max_pool_binary(const BinaryMask& mask, std::size_t k) {
    if (k == 0 || mask.height % k != 0 || mask.width % k != 0)
        throw ContractError("max_pool_binary window must divide the mask dims");
    BinaryMask out(mask.height / k, mask.width / k);
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x)
            if (mask.at(y, x)) out.at(y / k, x / k) = 1;
    return out;
}

Tensor mask_to_tensor(const BinaryMask& mask) {
    Tensor t({mask.height, mask.width}, 0.0);
    for (std::size_t i = 0; i < mask.data.size(); ++i) t.data()[i] = mask.data[i];
    return t;
}

BinaryMask tensor_to_mask(const Tensor& t, double threshold) {
    if (t.rank() != 2) throw ContractError("tensor_to_mask expects rank 2, got " + shape_str(t.shape()));
    BinaryMask m(t.dim(0), t.dim(1));
    for (std::size_t i = 0; i < t.size(); ++i) m.data[i] = t.data()[i] > threshold ? 1 : 0;
    return m;
}

namespace {

// Symmetric reflection index for bottom/right padding; pad < size required.
std::size_t reflect_idx(std::size_t i, std::size_t n) {
    return i < n ? i : 2 * n - 1 - i;
}

std::size_t round_up_16(std::size_t n) { return (n + 15) / 16 * 16; }

}  // namespace

Image pad_reflect_16(const Image& img) {
    std::size_t H = round_up_16(img.height), W = round_up_16(img.width);
    if (H - img.height >= img.height || W - img.width >= img.width)
        throw ContractError("image too small to reflect-pad to a multiple of 16");
    if (H == img.height && W == img.width) return img;
    Image out = make_image(H, W, img.channels);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(reflect_idx(y, img.height), reflect_idx(x, img.width), c);
    return out;
}

BinaryMask pad_reflect_16(const BinaryMask& mask) {
    std::size_t H = round_up_16(mask.height), W = round_up_16(mask.width);
    if (H - mask.height >= mask.height || W - mask.width >= mask.width)
        throw ContractError("mask too small to reflect-pad to a multiple of 16");
    if (H == mask.height && W == mask.width) return mask;
    BinaryMask out(H, W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            out.at(y, x) = mask.at(reflect_idx(y, mask.height), reflect_idx(x, mask.width));
    return out;
}

BinaryMask crop_mask(const BinaryMask& mask, std::size_t h, std::size_t w) {
    if (h > mask.height || w > mask.width)
        throw ContractError("crop larger than mask");
    BinaryMask out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(y, x) = mask.at(y, x);
    return out;
}

}  // namespace robotseg
