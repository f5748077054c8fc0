#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robotseg/tensor.hpp"

namespace robotseg {

// RGB or grayscale image, f64 in [0,1], row-major, channel-interleaved.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;  // 1 or 3
    std::vector<double> data;

    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return data[(y * width + x) * channels + c];
    }
    double& at(std::size_t y, std::size_t x, std::size_t c) {
        return data[(y * width + x) * channels + c];
    }
};

struct BinaryMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> data;  // strictly {0,1}

    BinaryMask() = default;
    BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), data(h * w, 0) {}
    std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
    std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
    std::size_t count() const;
    bool empty_mask() const { return count() == 0; }
};

using EdgeMap = BinaryMask;

Image make_image(std::size_t h, std::size_t w, std::size_t channels, double fill = 0.0);
Image rgb_to_luma(const Image& img);  // Rec. 601 weights; identity on 1-channel input

// Canny: Gaussian smooth, Sobel, non-maximum suppression, double-threshold
// hysteresis (weak pixels kept only when 8-connected to a strong pixel).
// low/high apply to gradient magnitude normalized by its image-wide maximum.
EdgeMap canny(const Image& img, double sigma, double low, double high);

// Exact Euclidean distance to the nearest 0-pixel; pixels outside the image
// count as 0, so an all-ones mask is still well-defined.
Tensor distance_transform(const BinaryMask& mask);
// Variant without the virtual zero border (used by the boundary F-measure,
// where an image-filling boundary must not be clipped by the frame).
// All-ones input yields +inf everywhere.
Tensor distance_transform_unbounded(const BinaryMask& mask);

// 1-pixels that touch a 0-pixel (4-adjacency) or the image border.
BinaryMask boundary_map(const BinaryMask& mask);

// Differentiable 16x16 block average; dims must be divisible by 16.
Tensor downsample_mask_16(const Tensor& soft_mask);

// Binary max over non-overlapping k x k blocks.
BinaryMask max_pool_binary(const BinaryMask& mask, std::size_t k);

Tensor mask_to_tensor(const BinaryMask& mask);
BinaryMask tensor_to_mask(const Tensor& t, double threshold = 0.5);

// Pad on the bottom/right with symmetric reflection so both dims become
// multiples of 16. Top-left pixel stays at (0,0); crop undoes it.
Image pad_reflect_16(const Image& img);
BinaryMask pad_reflect_16(const BinaryMask& mask);
BinaryMask crop_mask(const BinaryMask& mask, std::size_t h, std::size_t w);

// ---- file I/O ----
BinaryMask load_mask(const std::string& path);             // 8-bit grayscale PNG, >127 -> 1
void save_mask(const BinaryMask& mask, const std::string& path);  // writes 0/255
Image load_image(const std::string& path);                 // PNG (gray/rgb/rgba/palette) or PPM P6
void save_image_png(const Image& img, const std::string& path);

}  // namespace robotseg
