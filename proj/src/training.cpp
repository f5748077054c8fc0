#include "robotseg/training.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>

#include "robotseg/errors.hpp"
#include "robotseg/rng.hpp"
#include "robotseg/sema.hpp"

namespace robotseg {

std::vector<TraceRef> intermediate_set(const CycleTrace& tr) {
    std::vector<TraceRef> out;
    // Forward frames 1..t; backward frames t-1..1. Both frame-0 readouts are
    // endpoints, not members.
    for (std::size_t i = 1; i < tr.forward_probs.size(); ++i)
        out.push_back({false, i, tr.forward_frames[i]});
    for (std::size_t j = 0; j + 1 < tr.backward_probs.size(); ++j)
        out.push_back({true, j, tr.backward_frames[j]});
    return out;
}

Tensor loss_cycle(const Tensor& m0_forward, const Tensor& m0_backward, const Tensor& g0,
                  double focal_w, double dice_w) {
    return mask_loss(m0_forward, g0, focal_w, dice_w) + mask_loss(m0_backward, g0, focal_w, dice_w);
}

Tensor object_embedding(const Tensor& feats, const Tensor& mask) {
    if (feats.rank() != 3) throw DimensionError("object_embedding expects [C,h,w] features");
    if (mask.rank() != 2 || mask.dim(0) != feats.dim(1) || mask.dim(1) != feats.dim(2))
        throw DimensionError("object_embedding mask must match the feature grid");
    const std::size_t c = feats.dim(0), hw = feats.dim(1) * feats.dim(2);
    Tensor num = matmul(reshape(feats, {c, hw}), reshape(mask, {hw, 1}));
    return reshape(num / (sum(mask) + 1e-8), {c});
}

Tensor loss_semantic(const CycleTrace& tr) {
    std::vector<TraceRef> refs = intermediate_set(tr);
    if (refs.empty()) {
        std::cerr << "warning: no intermediate frames, semantic loss is 0\n";
        return Tensor::scalar(0.0);
    }
    Tensor f0 = object_embedding(tr.forward_feats[0], downsample_mask_16(tr.g0));
    Tensor acc = Tensor::scalar(0.0);
    for (const TraceRef& r : refs) {
        const Tensor& probs = r.backward ? tr.backward_probs[r.index] : tr.forward_probs[r.index];
        const Tensor& feats = r.backward ? tr.backward_feats[r.index] : tr.forward_feats[r.index];
        acc = acc + cosine(object_embedding(feats, downsample_mask_16(probs)), f0);
    }
    return 1.0 - acc / static_cast<double>(refs.size());
}

Tensor loss_patch(const CycleTrace& tr, const PseudoLabels& pl) {
    std::vector<TraceRef> refs = intermediate_set(tr);
    if (refs.empty()) return Tensor::scalar(0.0);
    Tensor acc = Tensor::scalar(0.0);
    for (const TraceRef& r : refs) {
        if (r.frame >= pl.labels.size())
            throw ContractError("pseudo labels missing frame " + std::to_string(r.frame));
        const Tensor& probs = r.backward ? tr.backward_probs[r.index] : tr.forward_probs[r.index];
        acc = acc + soft_iou_loss(downsample_mask_16(probs), pl.labels[r.frame], pl.valid[r.frame]);
    }
    return acc / static_cast<double>(refs.size());
}

Tensor loss_total(const LossComponents& c, const LossWeights& w) {
    return w.w_cyc * c.cycle + w.w_sem * c.semantic + w.w_patch * c.patch +
           w.w_struct * c.structure + kOcclusionLossWeight * c.occlusion;
}

double cosine_lr(double base, std::size_t step, std::size_t total) {
    if (step >= total) return 0.0;
    double frac = static_cast<double>(step) / static_cast<double>(total);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

Adam::Adam(ParamRegistry& reg, AdamConfig cfg) : reg_(&reg), cfg_(cfg) {
    for (const auto& [name, t] : reg.all()) {
        m_[name].assign(t.size(), 0.0);
        v_[name].assign(t.size(), 0.0);
    }
}

void Adam::apply(std::size_t step) {
    ++updates_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(updates_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(updates_));
    for (auto& [name, t] : reg_->all()) {
        const double base = name.rfind("encoder.", 0) == 0 ? cfg_.lr_encoder : cfg_.lr_rest;
        const double lr = cosine_lr(base, step, cfg_.total_steps);
        std::vector<double>& m = m_.at(name);
        std::vector<double>& v = v_.at(name);
        const std::vector<double>& g = t.grad_data();
        double* x = t.data().data();
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double gi = g.empty() ? 0.0 : g[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            x[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
        }
    }
    reg_->zero_grad();
}

namespace {

// Masks for present targets; an all-background mask means occluded.
double occlusion_target(const BinaryMask& g0) { return g0.empty_mask() ? 1.0 : 0.0; }

}  // namespace

LossReport train_step(RobotSegModel& model, const std::vector<ClipTask>& tasks, Adam& opt,
                      std::size_t step, const TrainConfig& cfg, std::mt19937_64& rng) {
    if (tasks.empty()) throw ContractError("train_step needs at least one task");
    if (cfg.batch_size == 0) throw ContractError("batch size must be positive");

    LossReport rep;
    rep.lr = cosine_lr(cfg.adam.lr_encoder, step, cfg.adam.total_steps);
    const std::size_t batch = std::min(cfg.batch_size, tasks.size());

    Tape tape;
    Tensor total = Tensor::scalar(0.0);
    for (std::size_t j = 0; j < batch; ++j) {
        const ClipTask& task = tasks[(step * batch + j) % tasks.size()];
        const BinaryMask& g0 = task.clip->g0.at(task.target);
        const std::size_t longest = task.clip->frames.size() - 1;
        const std::size_t span_cap = std::min(cfg.cycle_max_t, longest);
        const std::size_t t = span_cap > 0 ? 1 + rng_index(rng, span_cap) : 1;

        CycleTrace tr = run_cycle(model, task.clip->frames, g0, t, task.target);

        LossComponents c;
        c.cycle = loss_cycle(tr.forward_probs[0], tr.backward_probs.back(), tr.g0,
                             cfg.weights.focal_w, cfg.weights.dice_w);
        c.semantic = loss_semantic(tr);
        c.patch = loss_patch(tr, task.labels);
        const Tensor& s_back = tr.backward_structs.back();
        c.structure = s_back.size() > 0 ? structure_loss(s_back, g0) : Tensor::scalar(0.0);
        const double occ_t = occlusion_target(g0);
        c.occlusion = 0.5 * (bce_with_logit(tr.forward_occl[0], occ_t) +
                             bce_with_logit(tr.backward_occl.back(), occ_t));

        const std::pair<const char*, const Tensor*> parts[] = {
            {"cycle", &c.cycle},       {"semantic", &c.semantic}, {"patch", &c.patch},
            {"structure", &c.structure}, {"occlusion", &c.occlusion}};
        for (const auto& [name, comp] : parts) {
            if (!std::isfinite(comp->item())) {
                rep.aborted = true;
                rep.offender = name;
                break;  // report the first bad component
            }
        }
        rep.cycle += c.cycle.item();
        rep.semantic += c.semantic.item();
        rep.patch += c.patch.item();
        rep.structure += c.structure.item();
        rep.occlusion += c.occlusion.item();
        if (rep.aborted) break;

        total = total + loss_total(c, cfg.weights);
    }

    if (rep.aborted) {
        model.params().zero_grad();
        return rep;
    }

    total = total / static_cast<double>(batch);
    rep.cycle /= static_cast<double>(batch);
    rep.semantic /= static_cast<double>(batch);
    rep.patch /= static_cast<double>(batch);
    rep.structure /= static_cast<double>(batch);
    rep.occlusion /= static_cast<double>(batch);
    rep.total = total.item();
    backward(total);
    opt.apply(step);
    return rep;
}

void train(RobotSegModel& model, const std::vector<LoadedClip>& clips,
           const PatchFeatureProvider& provider, const TrainConfig& cfg, std::ostream& log) {
    if (clips.empty()) throw ContractError("training needs at least one clip");
    if (cfg.targets.empty()) throw ContractError("training needs at least one target class");

    std::vector<ClipTask> tasks;
    for (const LoadedClip& clip : clips) {
        if (clip.frames.size() < 2)
            throw ContractError("clip " + clip.name + " has fewer than 2 frames");
        std::vector<Image> padded;
        padded.reserve(clip.frames.size());
        for (const Image& f : clip.frames) padded.push_back(pad_reflect_16(f));
        for (TargetClass target : cfg.targets) {
            auto it = clip.g0.find(target);
            if (it == clip.g0.end())
                throw ContractError("clip " + clip.name + " lacks a frame-0 mask for " +
                                    target_name(target));
            ClipTask task;
            task.clip = &clip;
            task.target = target;
            task.labels = pseudo_labels(provider, padded, pad_reflect_16(it->second), cfg.tau);
            tasks.push_back(std::move(task));
        }
    }

    std::mt19937_64 rng(cfg.seed);
    Adam opt(model.params(), cfg.adam);

    log << "# step\tlr\tcycle\tsemantic\tpatch\tstructure\tocclusion\ttotal\n";
    log << std::setprecision(10);
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        LossReport rep = train_step(model, tasks, opt, s, cfg, rng);
        if (rep.aborted) {
            log << "# step " << s << " skipped: non-finite " << rep.offender << " loss\n";
            continue;
        }
        log << s << '\t' << rep.lr << '\t' << rep.cycle << '\t' << rep.semantic << '\t'
            << rep.patch << '\t' << rep.structure << '\t' << rep.occlusion << '\t' << rep.total
            << '\n';
    }
}

}  // namespace robotseg
