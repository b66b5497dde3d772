#include "cystonet/transformer.hpp"

#include <cmath>

#include "cystonet/rng.hpp"

namespace cysto {

int TransformerConfig::mlp_hidden() const { return static_cast<int>(std::lround(mlp_ratio * embed_dim)); }

void TransformerConfig::validate() const {
    if (embed_dim <= 0 || num_heads <= 0 || head_dim <= 0)
        raise(ErrorKind::InvalidArgument, "transformer: embed_dim, num_heads and head_dim must be positive");
    if (mlp_ratio <= 0.0 || mlp_hidden() < 1)
        raise(ErrorKind::InvalidArgument, "transformer: mlp_ratio must give a hidden width of at least 1");
    if (use_positional_encoding)
        raise(ErrorKind::InvalidArgument, "transformer: positional encodings are not part of this architecture");
}

namespace {

LinearParams make_linear(int in, int out, std::uint64_t seed) {
    LinearParams p;
    p.weight = Tensor::zeros({in, out}, true);
    rng::Stream s(seed);
    rng::fill_normal(p.weight.mutable_data(), s, std::sqrt(2.0 / in));
    p.bias = Tensor::zeros({out}, true);
    return p;
}

void collect_linear(const LinearParams& p, const std::string& prefix, NamedTensors& out) {
    out.emplace_back(prefix + ".weight", p.weight);
    out.emplace_back(prefix + ".bias", p.bias);
}

Tensor tokens_of(const Tensor& x) {
    return reshape(x, {x.dim(0), x.dim(1) * x.dim(2), x.dim(3)});
}

void expect_embed(const char* op, const Tensor& x, const TransformerConfig& cfg) {
    if (x.ndim() != 4) raise(ErrorKind::Shape, std::string(op) + ": expected [N,H,W,C]");
    if (x.dim(3) != cfg.embed_dim)
        raise(ErrorKind::Shape, std::string(op) + ": input has " + std::to_string(x.dim(3)) +
                                    " channels, block embeds " + std::to_string(cfg.embed_dim));
}

Tensor head_scores(const Tensor& tokens, const AttentionHeadParams& h, int head_dim) {
    Tensor q = linear(tokens, h.query);
    Tensor k = linear(tokens, h.key);
    Tensor scaled = mul_scalar(matmul(q, transpose(k, {0, 2, 1})), 1.0 / std::sqrt(static_cast<double>(head_dim)));
    return softmax(scaled, 2);  // [N,L,L]
}

Tensor mhsa_tokens(const Tensor& tokens, const TransformerBlockParams& p) {
    std::vector<Tensor> contexts;
    contexts.reserve(p.heads.size());
    for (const auto& h : p.heads) {
        Tensor weights = head_scores(tokens, h, p.config.head_dim);
        contexts.push_back(matmul(weights, linear(tokens, h.value), /*canonical_reduce=*/true));  // [N,L,hd]
    }
    Tensor cat = contexts.size() == 1 ? contexts[0] : concat(contexts, 2);
    return linear(cat, p.out_proj);  // [N,L,E]
}

}  // namespace

LayerNormParams make_layer_norm(int c) {
    LayerNormParams p;
    p.gamma = Tensor::full({c}, 1.0, true);
    p.beta = Tensor::zeros({c}, true);
    return p;
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
    if (x.dim(-1) != p.gamma.dim(0))
        raise(ErrorKind::Shape, "layer_norm: trailing extent does not match the parameter width");
    Tensor mu = mean_axes(x, {-1}, true);
    Tensor centered = sub(x, mu);
    Tensor var = mean_axes(mul(centered, centered), {-1}, true);
    Tensor inv = pow_scalar(add_scalar(var, p.epsilon), -0.5);
    return add(mul(mul(centered, inv), p.gamma), p.beta);
}

Tensor linear(const Tensor& tokens, const LinearParams& p) {
    if (tokens.dim(-1) != p.weight.dim(0))
        raise(ErrorKind::Shape, "linear: tokens have " + std::to_string(tokens.dim(-1)) + " channels, weight expects " +
                                    std::to_string(p.weight.dim(0)));
    return add(matmul(tokens, p.weight), p.bias);
}

TransformerBlockParams make_transformer_block(const TransformerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    TransformerBlockParams p;
    p.config = cfg;
    const int e = cfg.embed_dim, hd = cfg.head_dim, m = cfg.mlp_hidden();
    for (int h = 0; h < cfg.num_heads; ++h) {
        AttentionHeadParams head;
        head.query = make_linear(e, hd, rng::key(seed, "tf.q", h));
        head.key = make_linear(e, hd, rng::key(seed, "tf.k", h));
        head.value = make_linear(e, hd, rng::key(seed, "tf.v", h));
        p.heads.push_back(std::move(head));
    }
    p.out_proj = make_linear(cfg.num_heads * hd, e, rng::key(seed, "tf.out"));
    p.norm_attn = make_layer_norm(e);
    p.norm_mlp = make_layer_norm(e);
    p.mlp_in = make_linear(e, m, rng::key(seed, "tf.mlp_in"));
    p.mlp_out = make_linear(m, e, rng::key(seed, "tf.mlp_out"));
    return p;
}

void TransformerBlockParams::collect(const std::string& prefix, NamedTensors& out) const {
    for (std::size_t h = 0; h < heads.size(); ++h) {
        const std::string hp = prefix + ".head" + std::to_string(h);
        collect_linear(heads[h].query, hp + ".query", out);
        collect_linear(heads[h].key, hp + ".key", out);
        collect_linear(heads[h].value, hp + ".value", out);
    }
    collect_linear(out_proj, prefix + ".out_proj", out);
    out.emplace_back(prefix + ".norm_attn.gamma", norm_attn.gamma);
    out.emplace_back(prefix + ".norm_attn.beta", norm_attn.beta);
    out.emplace_back(prefix + ".norm_mlp.gamma", norm_mlp.gamma);
    out.emplace_back(prefix + ".norm_mlp.beta", norm_mlp.beta);
    collect_linear(mlp_in, prefix + ".mlp_in", out);
    collect_linear(mlp_out, prefix + ".mlp_out", out);
}

Tensor mhsa(const Tensor& x, const TransformerBlockParams& p) {
    expect_embed("mhsa", x, p.config);
    return reshape(mhsa_tokens(tokens_of(x), p), x.shape());
}

Tensor mhsa_attention_weights(const Tensor& x, const TransformerBlockParams& p) {
    expect_embed("mhsa", x, p.config);
    Tensor tokens = tokens_of(x);
    const int n = tokens.dim(0), l = tokens.dim(1);
    std::vector<Tensor> per_head;
    per_head.reserve(p.heads.size());
    for (const auto& h : p.heads) per_head.push_back(reshape(head_scores(tokens, h, p.config.head_dim), {n, 1, l, l}));
    return per_head.size() == 1 ? per_head[0] : concat(per_head, 1);
}

Tensor transformer_block(const Tensor& x, const TransformerBlockParams& p) {
    expect_embed("transformer_block", x, p.config);
    Tensor t = tokens_of(x);
    Tensor after_attn = add(t, mhsa_tokens(layer_norm(t, p.norm_attn), p));
    Tensor mlp = linear(leaky_relu(linear(layer_norm(after_attn, p.norm_mlp), p.mlp_in), p.leaky_slope), p.mlp_out);
    return reshape(add(after_attn, mlp), x.shape());
}

}  // namespace cysto
