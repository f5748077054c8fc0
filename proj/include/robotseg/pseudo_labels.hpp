#pragma once

#include <string>
#include <vector>

#include "robotseg/imaging.hpp"
#include "robotseg/tensor.hpp"

namespace robotseg {

// Per-frame patch grids at stride 16. Labels and validity are {0,1} values;
// invalid patches carry label 0 and are excluded from the patch loss.
struct PseudoLabels {
    std::vector<Tensor> labels;  // [h,w] per frame
    std::vector<Tensor> valid;   // [h,w] per frame
};

// Frame -> [h,w,D] patch descriptors. Must be deterministic per frame.
class PatchFeatureProvider {
public:
    virtual ~PatchFeatureProvider() = default;
    virtual Tensor features(const Image& padded_frame, std::size_t frame_index) const = 0;
    virtual std::size_t dim() const = 0;
};

// Dependency-free default: per 16x16 patch, mean RGB, RGB standard deviation,
// and mean Sobel magnitude of the luma, L2-normalized. D = 7.
class DescriptorProvider : public PatchFeatureProvider {
public:
    Tensor features(const Image& padded_frame, std::size_t frame_index) const override;
    std::size_t dim() const override { return 7; }
};

// Precomputed per-frame features loaded from an RSPF file, for dropping in
// externally computed descriptors.
class FileFeatureProvider : public PatchFeatureProvider {
public:
    explicit FileFeatureProvider(const std::string& path);
    Tensor features(const Image& padded_frame, std::size_t frame_index) const override;
    std::size_t dim() const override { return dim_; }
    std::size_t frame_count() const { return frames_.size(); }

private:
    std::vector<Tensor> frames_;
    std::size_t dim_ = 0;
};

// "RSPF" magic, u32 frame count, then per frame u32 h, w, D and the f64
// payload, everything little-endian.
void write_rspf(const std::string& path, const std::vector<Tensor>& frames);

// Label propagation: binarize the x16-downsampled frame-0 ground truth, then
// give each patch the label of its most cosine-similar frame-0 patch when the
// similarity reaches tau, otherwise mark it invalid.
PseudoLabels pseudo_labels(const PatchFeatureProvider& provider,
                           const std::vector<Image>& padded_frames,
                           const BinaryMask& g0_padded, double tau);

}  // namespace robotseg
