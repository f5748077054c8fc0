#include "robotseg/sema.hpp"

namespace robotseg {

AttnWeights make_attn_weights(ParamRegistry& reg, const std::string& prefix, std::size_t c,
                              std::mt19937_64& rng) {
    AttnWeights w;
    w.wq = reg.create(prefix + ".wq", {c, c}, c, rng);
    w.wk = reg.create(prefix + ".wk", {c, c}, c, rng);
    w.wv = reg.create(prefix + ".wv", {c, c}, c, rng);
    w.wo = reg.create(prefix + ".wo", {c, c}, c, rng);
    return w;
}

AttnWeights load_attn_weights(const ParamRegistry& reg, const std::string& prefix) {
    return {reg.get(prefix + ".wq"), reg.get(prefix + ".wk"), reg.get(prefix + ".wv"),
            reg.get(prefix + ".wo")};
}

Tensor grid_to_tokens(const Tensor& f) {
    std::size_t c = f.dim(0), hw = f.dim(1) * f.dim(2);
    return transpose(reshape(f, {c, hw}));
}

Tensor tokens_to_grid(const Tensor& tokens, std::size_t c, std::size_t h, std::size_t w) {
    return reshape(transpose(tokens), {c, h, w});
}

Tensor attn_block(const AttnWeights& w, const Tensor& q_in, const Tensor& kv_in) {
    return matmul(attention(matmul(q_in, w.wq), matmul(kv_in, w.wk), matmul(kv_in, w.wv)),
                  w.wo);
}

namespace {

// Bank entries concatenated along the token axis.
Tensor bank_tokens(const MemoryBank& bank) {
    if (bank.empty()) throw ContractError("SEMA requires a non-empty memory bank");
    std::vector<Tensor> parts;
    parts.reserve(bank.size());
    for (const MemoryEntry& e : bank.entries()) parts.push_back(grid_to_tokens(e.feature));
    return concat_rows(parts);
}

}  // namespace

SemaParams make_sema_params(ParamRegistry& reg, std::size_t c, std::mt19937_64& rng) {
    SemaParams p;
    p.assoc_self = make_attn_weights(reg, "sema.assoc.self", c, rng);
    p.assoc_cross = make_attn_weights(reg, "sema.assoc.cross", c, rng);
    p.mlp_w1 = reg.create("sema.assoc.mlp.w1", {c, 2 * c}, c, rng);
    p.mlp_b1 = reg.create("sema.assoc.mlp.b1", {2 * c}, c, rng);
    p.mlp_w2 = reg.create("sema.assoc.mlp.w2", {2 * c, c}, 2 * c, rng);
    p.mlp_b2 = reg.create("sema.assoc.mlp.b2", {c}, 2 * c, rng);
    p.k3 = reg.create("sema.ms.k3", {c, 3, 3}, 9, rng);
    p.k5 = reg.create("sema.ms.k5", {c, 5, 5}, 25, rng);
    p.k7 = reg.create("sema.ms.k7", {c, 7, 7}, 49, rng);
    p.mix3 = reg.create("sema.ms.mix3", {c}, 1, rng);
    p.mix5 = reg.create("sema.ms.mix5", {c}, 1, rng);
    p.mix7 = reg.create("sema.ms.mix7", {c}, 1, rng);
    p.struct_cross = make_attn_weights(reg, "sema.struct.cross", c, rng);
    p.struct_conv_w = reg.create("sema.struct.conv.w", {1, c, 3, 3}, c * 9, rng);
    p.struct_conv_b = reg.create("sema.struct.conv.b", {1}, c * 9, rng);
    // Zero start: the structure branch is a no-op until training opens it.
    p.alpha = reg.create_const("sema.alpha", {1}, 0.0);
    return p;
}

SemaParams load_sema_params(const ParamRegistry& reg) {
    SemaParams p;
    p.assoc_self = load_attn_weights(reg, "sema.assoc.self");
    p.assoc_cross = load_attn_weights(reg, "sema.assoc.cross");
    p.mlp_w1 = reg.get("sema.assoc.mlp.w1");
    p.mlp_b1 = reg.get("sema.assoc.mlp.b1");
    p.mlp_w2 = reg.get("sema.assoc.mlp.w2");
    p.mlp_b2 = reg.get("sema.assoc.mlp.b2");
    p.k3 = reg.get("sema.ms.k3");
    p.k5 = reg.get("sema.ms.k5");
    p.k7 = reg.get("sema.ms.k7");
    p.mix3 = reg.get("sema.ms.mix3");
    p.mix5 = reg.get("sema.ms.mix5");
    p.mix7 = reg.get("sema.ms.mix7");
    p.struct_cross = load_attn_weights(reg, "sema.struct.cross");
    p.struct_conv_w = reg.get("sema.struct.conv.w");
    p.struct_conv_b = reg.get("sema.struct.conv.b");
    p.alpha = reg.get("sema.alpha");
    return p;
}

Tensor temporal_associate(const Tensor& f, const MemoryBank& bank, const SemaParams& p) {
    if (f.rank() != 3)
        throw DimensionError("temporal_associate expects [C,h,w], got " + shape_str(f.shape()));
    Tensor m = bank_tokens(bank);
    std::size_t c = f.dim(0), h = f.dim(1), w = f.dim(2);
    Tensor x = grid_to_tokens(f);
    x = x + attn_block(p.assoc_self, x, x);
    x = x + attn_block(p.assoc_cross, x, m);
    x = x + (matmul(relu(matmul(x, p.mlp_w1) + reshape(p.mlp_b1, {1, 2 * c})), p.mlp_w2) +
             reshape(p.mlp_b2, {1, c}));
    return tokens_to_grid(x, c, h, w);
}

Tensor edge_modulate(const Tensor& f, const EdgeMap& e) {
    if (f.rank() != 3 || f.dim(1) != e.height || f.dim(2) != e.width)
        throw DimensionError("edge map " + std::to_string(e.height) + "x" +
                             std::to_string(e.width) + " does not match features " +
                             shape_str(f.shape()));
    Tensor em({1, e.height, e.width}, 0.0);
    for (std::size_t i = 0; i < e.data.size(); ++i) em.at(i) = e.data[i];
    return f * (1.0 + em);
}

Tensor multiscale(const Tensor& f_edge, const SemaParams& p) {
    std::size_t c = f_edge.dim(0);
    return reshape(p.mix3, {c, 1, 1}) * depthwise_conv2d(f_edge, p.k3) +
           reshape(p.mix5, {c, 1, 1}) * depthwise_conv2d(f_edge, p.k5) +
           reshape(p.mix7, {c, 1, 1}) * depthwise_conv2d(f_edge, p.k7);
}

Tensor structure_map(const Tensor& f_ms, const MemoryBank& bank, const SemaParams& p) {
    Tensor m = bank_tokens(bank);
    std::size_t c = f_ms.dim(0), h = f_ms.dim(1), w = f_ms.dim(2);
    Tensor x = attn_block(p.struct_cross, grid_to_tokens(f_ms), m);
    return sigmoid(conv2d(tokens_to_grid(x, c, h, w), p.struct_conv_w, p.struct_conv_b));
}

Tensor structure_modulate(const Tensor& f, const Tensor& s, const Tensor& alpha) {
    if (f.rank() != 3 || s.rank() != 3 || s.dim(0) != 1 || f.dim(1) != s.dim(1) ||
        f.dim(2) != s.dim(2))
        throw DimensionError("structure map " + shape_str(s.shape()) +
                             " does not match features " + shape_str(f.shape()));
    return f * (1.0 + alpha * s);
}

Tensor structure_loss(const Tensor& s, const BinaryMask& gt) {
    std::size_t h = s.dim(1), w = s.dim(2);
    BinaryMask boundary = boundary_map(gt);
    // Zero-extend to the padded grid; the pad band carries no boundary.
    BinaryMask ext(h * 16, w * 16);
    if (gt.height > ext.height || gt.width > ext.width)
        throw DimensionError("ground truth larger than the structure grid");
    for (std::size_t y = 0; y < gt.height; ++y)
        for (std::size_t x = 0; x < gt.width; ++x) ext.at(y, x) = boundary.at(y, x);
    BinaryMask target = max_pool_binary(ext, 16);
    Tensor t({1, h, w}, 0.0);
    for (std::size_t i = 0; i < target.data.size(); ++i) t.at(i) = target.data[i];
    Tensor sc = clamp(s, 1e-6, 1.0 - 1e-6);
    return mean(-(t * log(sc)) - (1.0 - t) * log(1.0 - sc));
}

Tensor sema_forward(const Tensor& f, const MemoryBank& bank, const EdgeMap& e,
                    const SemaParams& p, Tensor* s_out) {
    Tensor fp = temporal_associate(f, bank, p);
    Tensor s = structure_map(multiscale(edge_modulate(fp, e), p), bank, p);
    if (s_out) *s_out = s;
    return structure_modulate(fp, s, p.alpha);
}

}  // namespace robotseg
