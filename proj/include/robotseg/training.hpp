#pragma once

#include <cstdint>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "robotseg/checkpoint.hpp"
#include "robotseg/imaging.hpp"
#include "robotseg/losses.hpp"
#include "robotseg/memory.hpp"
#include "robotseg/model.hpp"
#include "robotseg/pseudo_labels.hpp"
#include "robotseg/rpg.hpp"
#include "robotseg/tensor.hpp"

namespace robotseg {

struct LossWeights {
    double w_cyc = 1.0;
    double w_sem = 0.1;
    double w_patch = 0.5;
    double w_struct = 0.5;
    double focal_w = 20.0;  // mix inside the cycle mask distance
    double dice_w = 1.0;
};

inline constexpr double kOcclusionLossWeight = 0.1;

// One training video: frames plus the frame-0 masks that exist for it.
struct LoadedClip {
    std::string name;
    std::vector<Image> frames;
    std::map<TargetClass, BinaryMask> g0;
};

// Everything the cycle losses need, recorded on the active tape. The forward
// leg holds frames 0..t (the frame-0 entry is the empty-bank readout, made
// before ground truth is pushed into memory); the backward leg holds frames
// t-1..0 predicted against a fresh bank seeded with frame t's own output.
struct CycleTrace {
    std::vector<Tensor> forward_probs, backward_probs;      // padded resolution
    std::vector<Tensor> forward_feats, backward_feats;      // [C,h,w], pre-association
    std::vector<Tensor> forward_structs, backward_structs;  // [1,h,w] or default-empty
    std::vector<Tensor> forward_occl, backward_occl;        // [1] logits
    std::vector<std::size_t> forward_frames, backward_frames;
    Tensor g0;  // padded frame-0 ground truth, constant

    std::size_t hops() const { return backward_probs.size(); }
};

// Position of one intermediate prediction (every frame visited strictly
// between the two frame-0 endpoints, both legs).
struct TraceRef {
    bool backward = false;
    std::size_t index = 0;  // into the leg's vectors
    std::size_t frame = 0;
};

std::vector<TraceRef> intermediate_set(const CycleTrace& tr);

// Forward-backward pass over frames 0..t. Duck-typed over the model so tests
// can substitute hand-built stand-ins; it needs config(), step() and
// encode_memory() with the real signatures.
template <typename Model>
CycleTrace run_cycle(const Model& model, const std::vector<Image>& frames, const BinaryMask& g0,
                     std::size_t t, TargetClass target) {
    if (t == 0) throw ContractError("cycle span must be at least 1 hop");
    if (frames.size() < 2) throw ContractError("cycle training needs at least 2 frames");
    if (g0.height != frames[0].height || g0.width != frames[0].width)
        throw DimensionError("frame-0 mask does not match the frames");
    if (t >= frames.size()) {
        std::cerr << "warning: clip has " << frames.size() << " frames, shortening cycle span to "
                  << frames.size() - 1 << "\n";
        t = frames.size() - 1;
    }

    std::vector<Image> padded;
    padded.reserve(t + 1);
    for (std::size_t i = 0; i <= t; ++i) padded.push_back(pad_reflect_16(frames[i]));

    CycleTrace tr;
    tr.g0 = mask_to_tensor(pad_reflect_16(g0));

    MemoryBank bank(model.config().memory_capacity);

    // Empty-bank readout of frame 0 trains the automatic bootstrap; ground
    // truth enters memory only afterwards.
    StepOutput s0 = model.step(padded[0], bank, target);
    tr.forward_probs.push_back(s0.probs);
    tr.forward_feats.push_back(s0.features);
    tr.forward_structs.push_back(s0.structure);
    tr.forward_occl.push_back(s0.occlusion);
    tr.forward_frames.push_back(0);
    bank.push(model.encode_memory(FrameFeatures{s0.features, 0}, tr.g0));

    for (std::size_t i = 1; i <= t; ++i) {
        StepOutput s = model.step(padded[i], bank, target);
        tr.forward_probs.push_back(s.probs);
        tr.forward_feats.push_back(s.features);
        tr.forward_structs.push_back(s.structure);
        tr.forward_occl.push_back(s.occlusion);
        tr.forward_frames.push_back(i);
        // Frame t's prediction seeds the backward bank instead.
        if (i < t) bank.push(model.encode_memory(FrameFeatures{s.features, i}, s.probs));
    }

    MemoryBank back(model.config().memory_capacity);
    back.push(model.encode_memory(FrameFeatures{tr.forward_feats[t], t}, tr.forward_probs[t]));
    for (std::size_t i = t; i-- > 0;) {
        StepOutput s = model.step(padded[i], back, target);
        tr.backward_probs.push_back(s.probs);
        tr.backward_feats.push_back(s.features);
        tr.backward_structs.push_back(s.structure);
        tr.backward_occl.push_back(s.occlusion);
        tr.backward_frames.push_back(i);
        if (i > 0) back.push(model.encode_memory(FrameFeatures{s.features, i}, s.probs));
    }
    return tr;
}

// Consistency between both frame-0 readouts and the ground truth.
Tensor loss_cycle(const Tensor& m0_forward, const Tensor& m0_backward, const Tensor& g0,
                  double focal_w = 20.0, double dice_w = 1.0);

// Mask-weighted mean feature, [C]. The +1e-8 keeps empty masks finite.
Tensor object_embedding(const Tensor& feats, const Tensor& mask);

// 1 - mean cosine between each intermediate object embedding and the frame-0
// ground-truth embedding.
Tensor loss_semantic(const CycleTrace& tr);

// Mean soft-IoU between downsampled intermediate masks and the propagated
// patch labels, on valid patches only.
Tensor loss_patch(const CycleTrace& tr, const PseudoLabels& pl);

struct LossComponents {
    Tensor cycle, semantic, patch, structure, occlusion;
};

Tensor loss_total(const LossComponents& c, const LossWeights& w);

// Half-cosine decay from base to exactly 0 at step >= total.
double cosine_lr(double base, std::size_t step, std::size_t total);

struct AdamConfig {
    double lr_encoder = 3e-4;  // parameters named "encoder.*"
    double lr_rest = 6e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t total_steps = 300;  // cosine schedule horizon
};

// Adam over a registry, two learning-rate groups, cosine schedule. Moment
// buffers key on parameter names; bias correction counts applied updates, so
// aborted steps do not advance it.
class Adam {
public:
    Adam(ParamRegistry& reg, AdamConfig cfg);
    void apply(std::size_t step);
    std::size_t updates() const { return updates_; }

private:
    ParamRegistry* reg_;
    AdamConfig cfg_;
    std::map<std::string, std::vector<double>> m_, v_;
    std::size_t updates_ = 0;
};

struct TrainConfig {
    LossWeights weights;
    AdamConfig adam;
    std::size_t steps = 300;
    std::size_t batch_size = 2;
    std::size_t cycle_max_t = 3;  // span sampled uniformly from [1, cycle_max_t]
    double tau = 0.7;             // pseudo-label similarity threshold
    std::vector<TargetClass> targets{TargetClass::Robot};
    std::uint64_t seed = 0;
};

// One clip/target pair with its precomputed patch labels.
struct ClipTask {
    const LoadedClip* clip = nullptr;
    TargetClass target = TargetClass::Robot;
    PseudoLabels labels;
};

struct LossReport {
    double cycle = 0, semantic = 0, patch = 0, structure = 0, occlusion = 0, total = 0;
    double lr = 0;
    bool aborted = false;     // a component went non-finite; no update applied
    std::string offender;     // which one, when aborted
};

// One optimizer step over batch_size tasks picked round-robin. Non-finite
// losses abort the whole step (gradients cleared, update counter untouched).
LossReport train_step(RobotSegModel& model, const std::vector<ClipTask>& tasks, Adam& opt,
                      std::size_t step, const TrainConfig& cfg, std::mt19937_64& rng);

// Full loop: builds tasks (one per clip and requested target; a clip missing
// the target's frame-0 mask is an error), precomputes pseudo labels, then
// runs cfg.steps steps logging one TSV row each.
void train(RobotSegModel& model, const std::vector<LoadedClip>& clips,
           const PatchFeatureProvider& provider, const TrainConfig& cfg, std::ostream& log);

}  // namespace robotseg
