#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cystonet/attention_gate.hpp"
#include "cystonet/loss.hpp"
#include "cystonet/nn.hpp"
#include "cystonet/transformer.hpp"

namespace cysto {

struct AblationFlags {
    bool use_dag = true;
    bool use_transformer = true;
};

struct ModelConfig {
    int input_h = 256, input_w = 256;
    int in_channels = 3;
    int num_classes = 4;
    std::vector<int> stage_channels = {16, 32, 64, 128};
    TransformerConfig transformer;  // embed_dim must equal stage_channels.back()
    SelfAttentionVariant gate_variant = SelfAttentionVariant::FullProjection;
    GateMode gate_mode = GateMode::Dual;
    int gate_token_budget = 1024;
    AblationFlags ablation;
    std::uint64_t seed = 0;

    int stages() const { return static_cast<int>(stage_channels.size()); }
    void validate() const;  // >= 2 stages; H,W divisible by 2^(stages-1)
};

/// Encoder/decoder stage unit: DW-separable conv, batchnorm, LeakyReLU.
struct ConvBlockParams {
    DWSeparableParams conv;
    BatchNormParams bn;
    double leaky_slope = 0.01;

    void collect(const std::string& prefix, NamedTensors& out) const;
};

ConvBlockParams make_conv_block(int c_in, int c_out, std::uint64_t seed);
Tensor conv_block(const Tensor& x, ConvBlockParams& p, bool training);

/// U-shaped network: DW-separable encoder stages with 2x2 max-pool
/// downsampling, a transformer (or conv) bottleneck, and a decoder of
/// bilinear upsampling plus gated skip concatenation.
struct Model {
    ModelConfig config;
    std::vector<ConvBlockParams> encoder;         // one per stage
    ConvBlockParams bottleneck_conv;              // when !use_transformer
    TransformerBlockParams bottleneck_attn;       // when use_transformer
    std::vector<DualAttentionGateParams> gates;   // skip i, i = 0..stages-2; empty when !use_dag
    std::vector<ConvBlockParams> decoder;         // level i consumes ch[i+1]+ch[i], emits ch[i]
    Conv2DParams head;                            // 1x1 to num_classes

    /// Every tensor in a stable order (parameters and buffers alike).
    NamedTensors named_state() const;
    /// Learnable tensors only, in named_state order.
    std::vector<Tensor> trainable() const;
};

Model build_model(const ModelConfig& config);

/// images [N, input_h, input_w, in_channels] -> logits [N, H, W, num_classes].
Tensor model_forward(Model& m, const Tensor& images, bool training);

/// Eval-mode forward followed by per-pixel argmax.
IntMask model_predict(Model& m, const Tensor& images);

/// Flat "key = value" text round-trip for the config record.
std::string encode_model_config(const ModelConfig& config);
ModelConfig decode_model_config(const std::string& text);

const char* variant_name(SelfAttentionVariant v);
SelfAttentionVariant parse_variant(const std::string& s);
const char* gate_mode_name(GateMode m);
GateMode parse_gate_mode(const std::string& s);

}  // namespace cysto
