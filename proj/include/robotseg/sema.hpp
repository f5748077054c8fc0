#pragma once

#include <random>

#include "robotseg/checkpoint.hpp"
#include "robotseg/imaging.hpp"
#include "robotseg/memory.hpp"
#include "robotseg/tensor.hpp"

namespace robotseg {

struct AttnWeights {
    Tensor wq, wk, wv, wo;  // all [C, C], no biases
};

struct SemaParams {
    AttnWeights assoc_self, assoc_cross;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;    // token MLP, hidden 2C
    Tensor k3, k5, k7;                        // depthwise kernels [C,3,3] [C,5,5] [C,7,7]
    Tensor mix3, mix5, mix7;                  // per-channel mixing [C]
    AttnWeights struct_cross;
    Tensor struct_conv_w, struct_conv_b;      // [1,C,3,3], [1]
    Tensor alpha;                             // scalar gate, starts at 0
};

// Registers every parameter under "sema." and returns live handles.
SemaParams make_sema_params(ParamRegistry& reg, std::size_t channels, std::mt19937_64& rng);
// Gathers previously registered handles (shapes fix the channel width).
SemaParams load_sema_params(const ParamRegistry& reg);

// Shared attention plumbing (also used by the encoder and mask decoder).
AttnWeights make_attn_weights(ParamRegistry& reg, const std::string& prefix, std::size_t c,
                              std::mt19937_64& rng);
AttnWeights load_attn_weights(const ParamRegistry& reg, const std::string& prefix);
// matmul(attention(q wq, kv wk, kv wv), wo); the residual is the caller's.
Tensor attn_block(const AttnWeights& w, const Tensor& q_in, const Tensor& kv_in);
// [C,h,w] grid <-> [h*w, C] token rows.
Tensor grid_to_tokens(const Tensor& f);
Tensor tokens_to_grid(const Tensor& tokens, std::size_t c, std::size_t h, std::size_t w);

// Residual self-attention over the frame's patch tokens, residual
// cross-attention into the concatenated bank entries, residual MLP.
Tensor temporal_associate(const Tensor& f, const MemoryBank& bank, const SemaParams& p);

// f * (1 + e), the edge map broadcast across channels.
Tensor edge_modulate(const Tensor& f, const EdgeMap& e);

// Sum of 3/5/7 depthwise convolutions, each scaled by a per-channel weight.
Tensor multiscale(const Tensor& f_edge, const SemaParams& p);

// sigmoid(conv3x3(cross_attn(f_ms, bank))) -> [1, h, w] strictly in (0,1).
Tensor structure_map(const Tensor& f_ms, const MemoryBank& bank, const SemaParams& p);

// f * (1 + alpha * s), s broadcast across channels.
Tensor structure_modulate(const Tensor& f, const Tensor& s, const Tensor& alpha);

// BCE between the map and the ground-truth mask's boundary max-pooled to the
// map's resolution. gt is at original image resolution (zero-extended to the
// padded grid before pooling).
Tensor structure_loss(const Tensor& s, const BinaryMask& gt);

// Full pipeline on one frame: associate, edge-modulate, multiscale, structure
// map, structure modulation. Returns the modulated features; *s_out (optional)
// receives the structure map.
Tensor sema_forward(const Tensor& f, const MemoryBank& bank, const EdgeMap& e,
                    const SemaParams& p, Tensor* s_out = nullptr);

}  // namespace robotseg
