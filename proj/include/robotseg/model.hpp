#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "robotseg/checkpoint.hpp"
#include "robotseg/imaging.hpp"
#include "robotseg/memory.hpp"
#include "robotseg/rpg.hpp"
#include "robotseg/sema.hpp"

namespace robotseg {

struct ModelConfig {
    std::size_t channels = 32;        // C; divisible by 4
    std::size_t decoder_masks = 3;    // K
    std::size_t memory_capacity = 4;  // N
    std::size_t rpg_regions = 4;      // R
    std::size_t rpg_subclusters = 4;  // S
    double canny_sigma = 1.4;
    double canny_low = 0.1;
    double canny_high = 0.3;
};

struct DecoderOutput {
    Tensor candidate_masks;  // [K, 4h, 4w] logits, stride 4 of the padded image
    Tensor iou_scores;       // [K], pre-sigmoid
    Tensor occlusion_logit;  // [1]
};

struct Click {
    std::size_t y = 0;
    std::size_t x = 0;
    bool positive = true;
};

struct Box {
    std::size_t y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // inclusive corners
};

struct Prompts {
    std::vector<Click> clicks;
    std::optional<Box> box;
    bool empty() const { return clicks.empty() && !box.has_value(); }
};

// Everything one frame's forward produces. Tensors stay attached to the
// active tape, so cycle losses reach earlier frames through the bank.
struct StepOutput {
    Tensor features;   // raw encoder grid [C,h,w], pre-association
    Tensor structure;  // [1,h,w]; default (empty) when the bank was empty
    Tensor logits;     // selected mask logits at padded resolution [16h,16w]
    Tensor probs;      // sigmoid(logits)
    Tensor iou_scores; // [K]
    Tensor occlusion;  // [1] logit
    std::size_t selected = 0;
};

class RobotSegModel {
public:
    RobotSegModel(ModelConfig cfg, std::uint64_t seed);

    // Patch embedding + fixed sinusoidal positions + one self-attention block.
    // The flag exists so tests can probe patch-permutation equivariance.
    FrameFeatures encode_frame(const Image& padded, bool with_positional = true) const;

    // Fuses the frame feature with its (soft) mask into a bank entry.
    MemoryEntry encode_memory(const FrameFeatures& feat, const Tensor& mask_probs) const;

    // Two two-way attention blocks over prompt+output tokens and image tokens,
    // then x4 transposed-conv upsampling and hypernetwork mask prediction.
    DecoderOutput decode_masks(const Tensor& feat, const std::vector<Tensor>& prompt_groups) const;

    // Candidate with the highest IoU score; ties go to the lowest index.
    static std::pair<Tensor, std::size_t> select_mask(const DecoderOutput& out);

    // Click/box embedding: sinusoidal position (patch units) + type row.
    Tensor prompt_tokens(const Prompts& p) const;

    // Full single-frame forward against a bank. Empty bank = conditioning
    // bootstrap: association and object tokens are skipped, the class token
    // (plus any user prompts) drives the decoder alone.
    StepOutput step(const Image& padded, const MemoryBank& bank, TargetClass target,
                    const Prompts* prompts = nullptr) const;

    ParamRegistry& params() { return reg_; }
    const ParamRegistry& params() const { return reg_; }
    const ModelConfig& config() const { return cfg_; }
    const SemaParams& sema_params() const { return sema_; }

private:
    struct MlpWeights {
        Tensor w1, b1, w2, b2;
    };
    struct TwoWayBlock {
        AttnWeights self_attn, token_to_image, image_to_token;
        MlpWeights mlp;
    };

    Tensor mlp_apply(const MlpWeights& m, const Tensor& x) const;

    ModelConfig cfg_;
    ParamRegistry reg_;
    SemaParams sema_;

    Tensor patch_w_, patch_b_;
    AttnWeights enc_attn_;
    MlpWeights enc_mlp_;

    Tensor mem_mask_w_, mem_mask_b_, mem_feat_w_, mem_feat_b_;
    Tensor mem_fuse1_w_, mem_fuse1_b_, mem_fuse2_w_, mem_fuse2_b_;
    Tensor mem_out_w_, mem_out_b_;

    Tensor rpg_bank_, rpg_proj_w_, rpg_proj_b_;
    Tensor prompt_type_;  // [4, d]: positive, negative, box corners

    Tensor dec_mask_tokens_, dec_iou_token_, dec_occl_token_;
    TwoWayBlock dec_blocks_[2];
    Tensor up1_w_, up1_b_, up2_w_, up2_b_;
    MlpWeights hyper_, iou_head_, occl_head_;
};

// Streaming per-video interface the evaluator drives. Implementations carry
// the memory state; masks come back at the original image resolution.
class SequenceModel {
public:
    virtual ~SequenceModel() = default;
    // Resets state and predicts frame 0 (prompts may be empty in automatic mode).
    virtual BinaryMask begin(const Image& frame0, const Prompts& prompts) = 0;
    // Predicts the next frame and commits it.
    virtual BinaryMask advance(const Image& frame) = 0;
    // Re-runs the current frame with the given prompts, replacing its commit.
    virtual BinaryMask correct(const Prompts& prompts) = 0;
};

class RobotSegSession : public SequenceModel {
public:
    RobotSegSession(const RobotSegModel& model, TargetClass target);
    BinaryMask begin(const Image& frame0, const Prompts& prompts) override;
    BinaryMask advance(const Image& frame) override;
    BinaryMask correct(const Prompts& prompts) override;

private:
    BinaryMask run_current(const Prompts* prompts);

    const RobotSegModel* model_;
    TargetClass target_;
    MemoryBank bank_;
    Image cur_padded_;
    std::size_t orig_h_ = 0, orig_w_ = 0;
    std::size_t frame_index_ = 0;
    bool started_ = false;
};

}  // namespace robotseg
