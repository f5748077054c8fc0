#include "robotseg/pseudo_labels.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "robotseg/errors.hpp"

namespace robotseg {

namespace {

constexpr std::size_t kPatch = 16;

void write_u32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw IoError("truncated feature file: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double read_f64(std::ifstream& f, const std::string& path) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw IoError("truncated feature file: " + path);
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | b[i];
    double d;
    std::memcpy(&d, &u, 8);
    return d;
}

void write_f64(std::ofstream& f, double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 8);
}

double patch_cosine(const double* a, const double* b, std::size_t d) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < d; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na < 1e-24 || nb < 1e-24) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

Tensor DescriptorProvider::features(const Image& img, std::size_t) const {
    if (img.height % kPatch != 0 || img.width % kPatch != 0)
        throw ContractError("descriptor provider needs images padded to multiples of 16");
    const std::size_t h = img.height / kPatch, w = img.width / kPatch;
    const std::size_t D = dim();

    Image luma = rgb_to_luma(img);
    // Sobel magnitude on the interior; the one-pixel border stays 0.
    std::vector<double> mag(img.height * img.width, 0.0);
    for (std::size_t y = 1; y + 1 < img.height; ++y)
        for (std::size_t x = 1; x + 1 < img.width; ++x) {
            auto l = [&](std::size_t yy, std::size_t xx) { return luma.at(yy, xx, 0); };
            double gx = l(y - 1, x + 1) + 2 * l(y, x + 1) + l(y + 1, x + 1) -
                        l(y - 1, x - 1) - 2 * l(y, x - 1) - l(y + 1, x - 1);
            double gy = l(y + 1, x - 1) + 2 * l(y + 1, x) + l(y + 1, x + 1) -
                        l(y - 1, x - 1) - 2 * l(y - 1, x) - l(y - 1, x + 1);
            mag[y * img.width + x] = std::sqrt(gx * gx + gy * gy);
        }

    Tensor out({h, w, D}, 0.0);
    const double n = static_cast<double>(kPatch * kPatch);
    for (std::size_t py = 0; py < h; ++py)
        for (std::size_t px = 0; px < w; ++px) {
            double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0}, msum = 0;
            for (std::size_t dy = 0; dy < kPatch; ++dy)
                for (std::size_t dx = 0; dx < kPatch; ++dx) {
                    std::size_t y = py * kPatch + dy, x = px * kPatch + dx;
                    for (std::size_t c = 0; c < 3; ++c) {
                        double v = img.channels == 3 ? img.at(y, x, c) : img.at(y, x, 0);
                        sum[c] += v;
                        sq[c] += v * v;
                    }
                    msum += mag[y * img.width + x];
                }
            double* row = out.data().data() + (py * w + px) * D;
            for (std::size_t c = 0; c < 3; ++c) {
                double m = sum[c] / n;
                row[c] = m;
                row[3 + c] = std::sqrt(std::max(0.0, sq[c] / n - m * m));
            }
            row[6] = msum / n;
            double norm = 0;
            for (std::size_t i = 0; i < D; ++i) norm += row[i] * row[i];
            norm = std::sqrt(norm);
            if (norm > 1e-12)
                for (std::size_t i = 0; i < D; ++i) row[i] /= norm;
        }
    return out;
}

FileFeatureProvider::FileFeatureProvider(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "RSPF", 4) != 0)
        throw IoError("not a patch feature file (bad magic): " + path);
    std::uint32_t count = read_u32(f, path);
    frames_.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t h = read_u32(f, path), w = read_u32(f, path), d = read_u32(f, path);
        if (i == 0) dim_ = d;
        if (d != dim_) throw IoError("inconsistent descriptor width in " + path);
        Tensor t({h, w, d}, 0.0);
        for (double& v : t.data()) v = read_f64(f, path);
        frames_.push_back(std::move(t));
    }
}

Tensor FileFeatureProvider::features(const Image&, std::size_t frame_index) const {
    if (frame_index >= frames_.size())
        throw ContractError("feature file has no frame " + std::to_string(frame_index));
    return frames_[frame_index];
}

void write_rspf(const std::string& path, const std::vector<Tensor>& frames) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write: " + path);
    f.write("RSPF", 4);
    write_u32(f, static_cast<std::uint32_t>(frames.size()));
    for (const Tensor& t : frames) {
        if (t.rank() != 3) throw ContractError("patch features must be rank 3 [h,w,D]");
        write_u32(f, static_cast<std::uint32_t>(t.dim(0)));
        write_u32(f, static_cast<std::uint32_t>(t.dim(1)));
        write_u32(f, static_cast<std::uint32_t>(t.dim(2)));
        for (double v : t.data()) write_f64(f, v);
    }
    if (!f) throw IoError("write failed: " + path);
}

PseudoLabels pseudo_labels(const PatchFeatureProvider& provider,
                           const std::vector<Image>& padded_frames,
                           const BinaryMask& g0_padded, double tau) {
    if (padded_frames.empty()) throw ContractError("pseudo labels need at least one frame");
    if (g0_padded.height != padded_frames[0].height || g0_padded.width != padded_frames[0].width)
        throw DimensionError("frame-0 mask does not match the frames");

    Tensor ref = provider.features(padded_frames[0], 0);
    const std::size_t h = ref.dim(0), w = ref.dim(1), D = ref.dim(2);
    Tensor g16 = avg_pool2d(mask_to_tensor(g0_padded), kPatch);
    std::vector<double> label0(h * w);
    for (std::size_t i = 0; i < h * w; ++i) label0[i] = g16.at(i) >= 0.5 ? 1.0 : 0.0;

    PseudoLabels out;
    for (std::size_t fi = 0; fi < padded_frames.size(); ++fi) {
        Tensor feats = provider.features(padded_frames[fi], fi);
        if (feats.dim(0) != h || feats.dim(1) != w)
            throw DimensionError("provider grid changed size mid-clip");
        Tensor lab({h, w}, 0.0), val({h, w}, 0.0);
        for (std::size_t p = 0; p < h * w; ++p) {
            const double* dp = feats.data().data() + p * D;
            double best = -2.0;
            std::size_t best_q = 0;
            for (std::size_t q = 0; q < h * w; ++q) {
                double s = patch_cosine(dp, ref.data().data() + q * D, D);
                if (s > best) {
                    best = s;
                    best_q = q;
                }
            }
            if (best >= tau) {
                lab.at(p) = label0[best_q];
                val.at(p) = 1.0;
            }
        }
        out.labels.push_back(std::move(lab));
        out.valid.push_back(std::move(val));
    }
    return out;
}

}  // namespace robotseg
