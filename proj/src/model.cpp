#include "robotseg/model.hpp"

#include <cmath>

namespace robotseg {

namespace {

constexpr std::size_t kPatch = 16;
constexpr std::size_t kPatchDim = 3 * kPatch * kPatch;

// Fixed sinusoidal position code for (y, x) in patch units; d % 4 == 0.
void sincos_fill(double* row, double y, double x, std::size_t d) {
    std::size_t q = d / 4;
    for (std::size_t j = 0; j < q; ++j) {
        double f = std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(q));
        row[4 * j + 0] = std::sin(y * f);
        row[4 * j + 1] = std::cos(y * f);
        row[4 * j + 2] = std::sin(x * f);
        row[4 * j + 3] = std::cos(x * f);
    }
}

Tensor sincos_grid(std::size_t h, std::size_t w, std::size_t d) {
    Tensor pe({h * w, d}, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            sincos_fill(pe.data().data() + (y * w + x) * d,
                        static_cast<double>(y), static_cast<double>(x), d);
    return pe;
}

Tensor sincos_row(double y, double x, std::size_t d) {
    Tensor pe({1, d}, 0.0);
    sincos_fill(pe.data().data(), y, x, d);
    return pe;
}

}  // namespace

Tensor RobotSegModel::mlp_apply(const MlpWeights& m, const Tensor& x) const {
    Tensor mid = relu(matmul(x, m.w1) + reshape(m.b1, {1, m.b1.size()}));
    return matmul(mid, m.w2) + reshape(m.b2, {1, m.b2.size()});
}

RobotSegModel::RobotSegModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.channels == 0 || cfg_.channels % 4 != 0)
        throw ConfigError("channels must be a positive multiple of 4");
    if (cfg_.decoder_masks == 0) throw ConfigError("decoder_masks must be >= 1");
    if (cfg_.memory_capacity == 0) throw ConfigError("memory_capacity must be >= 1");
    if (cfg_.rpg_regions == 0 || cfg_.rpg_subclusters == 0)
        throw ConfigError("rpg_regions and rpg_subclusters must be >= 1");

    std::mt19937_64 rng(seed);
    const std::size_t C = cfg_.channels;
    const std::size_t K = cfg_.decoder_masks;

    patch_w_ = reg_.create("encoder.patch.w", {kPatchDim, C}, kPatchDim, rng);
    patch_b_ = reg_.create("encoder.patch.b", {C}, kPatchDim, rng);
    enc_attn_ = make_attn_weights(reg_, "encoder.attn", C, rng);
    enc_mlp_.w1 = reg_.create("encoder.mlp.w1", {C, 2 * C}, C, rng);
    enc_mlp_.b1 = reg_.create("encoder.mlp.b1", {2 * C}, C, rng);
    enc_mlp_.w2 = reg_.create("encoder.mlp.w2", {2 * C, C}, 2 * C, rng);
    enc_mlp_.b2 = reg_.create("encoder.mlp.b2", {C}, 2 * C, rng);

    mem_mask_w_ = reg_.create("memenc.mask.w", {C, 1, 1, 1}, 1, rng);
    mem_mask_b_ = reg_.create("memenc.mask.b", {C}, 1, rng);
    mem_feat_w_ = reg_.create("memenc.feat.w", {C, C, 1, 1}, C, rng);
    mem_feat_b_ = reg_.create("memenc.feat.b", {C}, C, rng);
    mem_fuse1_w_ = reg_.create("memenc.fuse1.w", {C, C, 3, 3}, C * 9, rng);
    mem_fuse1_b_ = reg_.create("memenc.fuse1.b", {C}, C * 9, rng);
    mem_fuse2_w_ = reg_.create("memenc.fuse2.w", {C, C, 3, 3}, C * 9, rng);
    mem_fuse2_b_ = reg_.create("memenc.fuse2.b", {C}, C * 9, rng);
    mem_out_w_ = reg_.create("memenc.out.w", {C, C, 1, 1}, C, rng);
    mem_out_b_ = reg_.create("memenc.out.b", {C}, C, rng);

    sema_ = make_sema_params(reg_, C, rng);

    const std::size_t SC = cfg_.rpg_subclusters * C;
    rpg_bank_ = reg_.create("rpg.bank", {3, C}, C, rng);
    rpg_proj_w_ = reg_.create("rpg.proj.w", {SC, C}, SC, rng);
    rpg_proj_b_ = reg_.create("rpg.proj.b", {C}, SC, rng);

    prompt_type_ = reg_.create("prompt.type", {4, C}, C, rng);

    dec_mask_tokens_ = reg_.create("decoder.mask_tokens", {K, C}, C, rng);
    dec_iou_token_ = reg_.create("decoder.iou_token", {1, C}, C, rng);
    dec_occl_token_ = reg_.create("decoder.occl_token", {1, C}, C, rng);
    for (int b = 0; b < 2; ++b) {
        std::string pre = "decoder.block" + std::to_string(b);
        dec_blocks_[b].self_attn = make_attn_weights(reg_, pre + ".self", C, rng);
        dec_blocks_[b].token_to_image = make_attn_weights(reg_, pre + ".t2i", C, rng);
        dec_blocks_[b].image_to_token = make_attn_weights(reg_, pre + ".i2t", C, rng);
        dec_blocks_[b].mlp.w1 = reg_.create(pre + ".mlp.w1", {C, 2 * C}, C, rng);
        dec_blocks_[b].mlp.b1 = reg_.create(pre + ".mlp.b1", {2 * C}, C, rng);
        dec_blocks_[b].mlp.w2 = reg_.create(pre + ".mlp.w2", {2 * C, C}, 2 * C, rng);
        dec_blocks_[b].mlp.b2 = reg_.create(pre + ".mlp.b2", {C}, 2 * C, rng);
    }
    up1_w_ = reg_.create("decoder.up1.w", {C, C / 2, 2, 2}, C * 4, rng);
    up1_b_ = reg_.create("decoder.up1.b", {C / 2}, C * 4, rng);
    up2_w_ = reg_.create("decoder.up2.w", {C / 2, C / 4, 2, 2}, C * 2, rng);
    up2_b_ = reg_.create("decoder.up2.b", {C / 4}, C * 2, rng);
    hyper_.w1 = reg_.create("decoder.hyper.w1", {C, 2 * C}, C, rng);
    hyper_.b1 = reg_.create("decoder.hyper.b1", {2 * C}, C, rng);
    hyper_.w2 = reg_.create("decoder.hyper.w2", {2 * C, C / 4}, 2 * C, rng);
    hyper_.b2 = reg_.create("decoder.hyper.b2", {C / 4}, 2 * C, rng);
    iou_head_.w1 = reg_.create("decoder.iou.w1", {C, 2 * C}, C, rng);
    iou_head_.b1 = reg_.create("decoder.iou.b1", {2 * C}, C, rng);
    iou_head_.w2 = reg_.create("decoder.iou.w2", {2 * C, K}, 2 * C, rng);
    iou_head_.b2 = reg_.create("decoder.iou.b2", {K}, 2 * C, rng);
    occl_head_.w1 = reg_.create("decoder.occl.w1", {C, 2 * C}, C, rng);
    occl_head_.b1 = reg_.create("decoder.occl.b1", {2 * C}, C, rng);
    occl_head_.w2 = reg_.create("decoder.occl.w2", {2 * C, 1}, 2 * C, rng);
    occl_head_.b2 = reg_.create("decoder.occl.b2", {1}, 2 * C, rng);
}

FrameFeatures RobotSegModel::encode_frame(const Image& padded, bool with_positional) const {
    if (padded.channels != 3) throw ContractError("encoder expects an RGB image");
    if (padded.height == 0 || padded.width == 0 || padded.height % kPatch != 0 ||
        padded.width % kPatch != 0)
        throw ContractError("encoder input must be padded to multiples of 16");
    const std::size_t C = cfg_.channels;
    const std::size_t h = padded.height / kPatch, w = padded.width / kPatch;

    Tensor patches({h * w, kPatchDim}, 0.0);  // plain data; gradients enter via the projection
    for (std::size_t py = 0; py < h; ++py)
        for (std::size_t px = 0; px < w; ++px) {
            double* row = patches.data().data() + (py * w + px) * kPatchDim;
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t dy = 0; dy < kPatch; ++dy)
                    for (std::size_t dx = 0; dx < kPatch; ++dx)
                        row[c * kPatch * kPatch + dy * kPatch + dx] =
                            padded.at(py * kPatch + dy, px * kPatch + dx, c);
        }

    Tensor x = matmul(patches, patch_w_) + reshape(patch_b_, {1, C});
    if (with_positional) x = x + sincos_grid(h, w, C);
    x = x + attn_block(enc_attn_, x, x);
    x = x + mlp_apply(enc_mlp_, x);
    return {tokens_to_grid(x, C, h, w), 0};
}

MemoryEntry RobotSegModel::encode_memory(const FrameFeatures& feat, const Tensor& mask_probs) const {
    const std::size_t h = feat.grid.dim(1), w = feat.grid.dim(2);
    if (mask_probs.rank() != 2 || mask_probs.dim(0) != h * kPatch || mask_probs.dim(1) != w * kPatch)
        throw DimensionError("memory mask " + shape_str(mask_probs.shape()) +
                             " does not cover the feature grid " + shape_str(feat.grid.shape()));
    Tensor m16 = reshape(avg_pool2d(mask_probs, kPatch), {1, h, w});
    Tensor fused = conv2d(m16, mem_mask_w_, mem_mask_b_) +
                   conv2d(feat.grid, mem_feat_w_, mem_feat_b_);
    fused = relu(conv2d(fused, mem_fuse1_w_, mem_fuse1_b_));
    fused = conv2d(fused, mem_fuse2_w_, mem_fuse2_b_);

    MemoryEntry e;
    e.feature = conv2d(fused, mem_out_w_, mem_out_b_);
    e.mask = max_pool_binary(tensor_to_mask(mask_probs), kPatch);
    e.source_frame = feat.frame_index;
    return e;
}

DecoderOutput RobotSegModel::decode_masks(const Tensor& feat,
                                          const std::vector<Tensor>& prompt_groups) const {
    const std::size_t C = cfg_.channels, K = cfg_.decoder_masks;
    if (feat.rank() != 3 || feat.dim(0) != C)
        throw DimensionError("decoder expects [" + std::to_string(C) + ",h,w] features, got " +
                             shape_str(feat.shape()));
    std::size_t total = 0;
    for (const Tensor& g : prompt_groups) {
        if (g.rank() != 2 || g.dim(1) != C)
            throw DimensionError("prompt tokens must be [n," + std::to_string(C) + "], got " +
                                 shape_str(g.shape()));
        total += g.dim(0);
    }
    if (total == 0) throw ContractError("decoder needs at least one prompt token");
    const std::size_t h = feat.dim(1), w = feat.dim(2);

    std::vector<Tensor> parts{dec_mask_tokens_, dec_iou_token_, dec_occl_token_};
    for (const Tensor& g : prompt_groups) parts.push_back(g);
    Tensor t = concat_rows(parts);
    Tensor x = grid_to_tokens(feat) + sincos_grid(h, w, C);

    for (const TwoWayBlock& blk : dec_blocks_) {
        t = t + attn_block(blk.self_attn, t, t);
        t = t + attn_block(blk.token_to_image, t, x);
        t = t + mlp_apply(blk.mlp, t);
        x = x + attn_block(blk.image_to_token, x, t);
    }

    Tensor u = relu(conv_transpose2d(tokens_to_grid(x, C, h, w), up1_w_, up1_b_));
    u = conv_transpose2d(u, up2_w_, up2_b_);  // [C/4, 4h, 4w]

    Tensor hyper = mlp_apply(hyper_, slice_rows(t, 0, K));  // [K, C/4]
    Tensor masks = reshape(matmul(hyper, reshape(u, {C / 4, 16 * h * w})), {K, 4 * h, 4 * w});
    Tensor iou = mlp_apply(iou_head_, slice_rows(t, K, K + 1));
    Tensor occ = mlp_apply(occl_head_, slice_rows(t, K + 1, K + 2));
    return {masks, reshape(iou, {K}), reshape(occ, {1})};
}

std::pair<Tensor, std::size_t> RobotSegModel::select_mask(const DecoderOutput& out) {
    const std::vector<double>& s = out.iou_scores.data();
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] > s[best]) best = i;
    const std::size_t K = out.candidate_masks.dim(0);
    const std::size_t hh = out.candidate_masks.dim(1), ww = out.candidate_masks.dim(2);
    Tensor flat = reshape(out.candidate_masks, {K, hh * ww});
    return {reshape(slice_rows(flat, best, best + 1), {hh, ww}), best};
}

Tensor RobotSegModel::prompt_tokens(const Prompts& p) const {
    if (p.empty()) throw ContractError("prompt embedding needs at least one click or box");
    const std::size_t d = cfg_.channels;
    const double scale = static_cast<double>(kPatch);
    std::vector<Tensor> rows;
    for (const Click& c : p.clicks) {
        std::size_t type = c.positive ? 0 : 1;
        rows.push_back(sincos_row(static_cast<double>(c.y) / scale,
                                  static_cast<double>(c.x) / scale, d) +
                       slice_rows(prompt_type_, type, type + 1));
    }
    if (p.box) {
        rows.push_back(sincos_row(static_cast<double>(p.box->y0) / scale,
                                  static_cast<double>(p.box->x0) / scale, d) +
                       slice_rows(prompt_type_, 2, 3));
        rows.push_back(sincos_row(static_cast<double>(p.box->y1) / scale,
                                  static_cast<double>(p.box->x1) / scale, d) +
                       slice_rows(prompt_type_, 3, 4));
    }
    return concat_rows(rows);
}

StepOutput RobotSegModel::step(const Image& padded, const MemoryBank& bank, TargetClass target,
                               const Prompts* prompts) const {
    StepOutput out;
    FrameFeatures feat = encode_frame(padded);
    out.features = feat.grid;

    Tensor dec_feat = feat.grid;
    if (!bank.empty()) {
        EdgeMap e = max_pool_binary(
            canny(padded, cfg_.canny_sigma, cfg_.canny_low, cfg_.canny_high), kPatch);
        dec_feat = sema_forward(feat.grid, bank, e, sema_, &out.structure);
    }

    std::vector<Tensor> groups;
    groups.push_back(class_tokens(rpg_bank_, target));
    if (!bank.empty()) {
        const std::size_t C = cfg_.channels, h = feat.grid.dim(1), w = feat.grid.dim(2);
        const std::size_t n = bank.size();
        Tensor fpre({n, C, h, w}, 0.0);
        std::vector<BinaryMask> mpre;
        mpre.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const MemoryEntry& e = bank.entries()[i];
            std::copy(e.feature.data().begin(), e.feature.data().end(),
                      fpre.data().begin() + static_cast<std::ptrdiff_t>(i * C * h * w));
            mpre.push_back(e.mask);
        }
        ObjectTokens toks = object_tokens(fpre, mpre, cfg_.rpg_regions, cfg_.rpg_subclusters);
        groups.push_back(project_tokens(toks, rpg_proj_w_, rpg_proj_b_));
    }
    if (prompts != nullptr && !prompts->empty()) groups.push_back(prompt_tokens(*prompts));

    DecoderOutput dec = decode_masks(dec_feat, groups);
    auto [sel, idx] = select_mask(dec);
    out.selected = idx;
    out.iou_scores = dec.iou_scores;
    out.occlusion = dec.occlusion_logit;
    out.logits = upsample_bilinear(sel, 4);
    out.probs = sigmoid(out.logits);
    return out;
}

RobotSegSession::RobotSegSession(const RobotSegModel& model, TargetClass target)
    : model_(&model), target_(target), bank_(model.config().memory_capacity) {}

BinaryMask RobotSegSession::begin(const Image& frame0, const Prompts& prompts) {
    bank_.clear();
    frame_index_ = 0;
    orig_h_ = frame0.height;
    orig_w_ = frame0.width;
    cur_padded_ = pad_reflect_16(frame0);
    started_ = true;
    return run_current(prompts.empty() ? nullptr : &prompts);
}

BinaryMask RobotSegSession::advance(const Image& frame) {
    if (!started_) throw ContractError("advance before begin");
    if (frame.height != orig_h_ || frame.width != orig_w_)
        throw DimensionError("frame size changed mid-video");
    ++frame_index_;
    cur_padded_ = pad_reflect_16(frame);
    return run_current(nullptr);
}

BinaryMask RobotSegSession::correct(const Prompts& prompts) {
    if (!started_) throw ContractError("correct before begin");
    bank_.pop_newest();  // the frame re-enters below with the corrected mask
    return run_current(&prompts);
}

BinaryMask RobotSegSession::run_current(const Prompts* prompts) {
    StepOutput out = model_->step(cur_padded_, bank_, target_, prompts);
    bank_.push(model_->encode_memory({out.features, frame_index_}, out.probs));
    if (out.occlusion.item() > 0.0) return BinaryMask(orig_h_, orig_w_);  // reported occluded
    return crop_mask(tensor_to_mask(out.probs), orig_h_, orig_w_);
}

}  // namespace robotseg
