#pragma once

#include <cstdint>

#include "cystonet/nn.hpp"
#include "cystonet/tensor.hpp"

namespace cysto {

/// Similarity/value computation inside the non-local attention path.
/// Weightless compares tokens by raw dot product and carries no scalars.
enum class SelfAttentionVariant { FullProjection, SharedProjection, Weightless };

/// Which attention paths gate a skip connection.
enum class GateMode { None, Spatial, SelfAttn, Dual };

struct NonlocalAttentionParams {
    SelfAttentionVariant variant = SelfAttentionVariant::Weightless;
    Conv2DParams query, key, value;  // 1x1, C->C; FullProjection only
    Conv2DParams shared;             // 1x1, C->C; SharedProjection only

    void collect(const std::string& prefix, NamedTensors& out) const;
};

NonlocalAttentionParams make_nonlocal_attention(int c, SelfAttentionVariant variant, std::uint64_t seed);

/// Eq-style non-local attention over the H*W token positions of x.
Tensor nonlocal_self_attention(const Tensor& x, const NonlocalAttentionParams& p);

/// The row-stochastic attention matrix, [N, H*W, H*W]. Debug/test surface.
Tensor nonlocal_attention_weights(const Tensor& x, const NonlocalAttentionParams& p);

struct DualAttentionGateParams {
    GateMode mode = GateMode::Dual;
    SelfAttentionVariant variant = SelfAttentionVariant::Weightless;
    double leaky_slope = 0.01;
    /// Above this many token positions the self path runs at pooled
    /// resolution and its gate map is bilinearly upsampled back.
    int token_budget = 1024;

    // self path (Spatial-only gates leave these undefined)
    NonlocalAttentionParams self_x, self_g;
    Conv2DParams self_post_x, self_post_g;  // 1x1 to one channel

    // spatial path (SelfAttn-only gates leave these undefined)
    DWSeparableParams spatial_x, spatial_g;  // DW + 1x1 to the mixing width
    Conv2DParams spatial_out;                // 1x1 to one channel

    void collect(const std::string& prefix, NamedTensors& out) const;
};

DualAttentionGateParams make_dual_gate(int c_x, int c_g, GateMode mode, SelfAttentionVariant variant,
                                       int token_budget, std::uint64_t seed);

/// Downsampling factor the self path uses to stay within token_budget:
/// doubles while the token count exceeds the budget and both extents divide.
int budget_pool_factor(int h, int w, int token_budget);

/// Per-pixel gate value in (0,1) from the spatial path alone, [N,H,W,1].
Tensor spatial_gate(const Tensor& x, const Tensor& g, const DualAttentionGateParams& p);

/// Per-pixel gate value in (0,1) from the self-attention path alone, [N,H,W,1].
Tensor self_attention_gate(const Tensor& x, const Tensor& g, const DualAttentionGateParams& p);

/// x gated by the paths selected in p.mode; g must already match x's H,W.
Tensor apply_attention_gate(const Tensor& x, const Tensor& g, const DualAttentionGateParams& p);

}  // namespace cysto
