#pragma once

#include <cstdint>
#include <vector>

#include "cystonet/nn.hpp"
#include "cystonet/tensor.hpp"

namespace cysto {

struct TransformerConfig {
    int embed_dim = 128;
    int num_heads = 4;
    int head_dim = 32;      // full per-head width; params grow linearly with heads
    double mlp_ratio = 2.0;
    bool use_positional_encoding = false;  // architecture contract: must stay false

    int mlp_hidden() const;
    void validate() const;
};

struct LinearParams {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]
};

struct LayerNormParams {
    Tensor gamma, beta;  // [C]
    double epsilon = 1e-5;
};

struct AttentionHeadParams {
    LinearParams query, key, value;  // embed_dim -> head_dim each
};

struct TransformerBlockParams {
    TransformerConfig config;
    std::vector<AttentionHeadParams> heads;
    LinearParams out_proj;  // num_heads*head_dim -> embed_dim
    LayerNormParams norm_attn, norm_mlp;
    LinearParams mlp_in, mlp_out;
    double leaky_slope = 0.01;

    void collect(const std::string& prefix, NamedTensors& out) const;
};

TransformerBlockParams make_transformer_block(const TransformerConfig& cfg, std::uint64_t seed);

LayerNormParams make_layer_norm(int c);

/// Normalizes the trailing (channel) axis per token.
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

Tensor linear(const Tensor& tokens, const LinearParams& p);

/// Multi-head self-attention over the H*W tokens of x, softmax(QK^T/sqrt(d))V
/// per head, heads concatenated then projected back to embed_dim.
Tensor mhsa(const Tensor& x, const TransformerBlockParams& p);

/// Per-head attention matrices, [N, num_heads, L, L]. Debug/test surface.
Tensor mhsa_attention_weights(const Tensor& x, const TransformerBlockParams& p);

/// Pre-norm residual block: x + mhsa(norm(x)), then + mlp(norm(.)).
Tensor transformer_block(const Tensor& x, const TransformerBlockParams& p);

}  // namespace cysto
