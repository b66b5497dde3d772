#include "cystonet/attention_gate.hpp"

#include "cystonet/rng.hpp"

namespace cysto {

namespace {

void expect_aligned(const char* op, const Tensor& x, const Tensor& g) {
    if (x.ndim() != 4 || g.ndim() != 4)
        raise(ErrorKind::Shape, std::string(op) + ": expected [N,H,W,C] inputs");
    if (x.dim(0) != g.dim(0) || x.dim(1) != g.dim(1) || x.dim(2) != g.dim(2))
        raise(ErrorKind::Shape, std::string(op) + ": x " + shape_str(x.shape()) + " and g " + shape_str(g.shape()) +
                                    " are not spatially aligned; resample g first");
}

// 1x1 conv applied to a [N,L,C] token tensor.
Tensor project_tokens(const Tensor& tokens, const Conv2DParams& p) {
    const Shape& ks = p.kernel.shape();
    if (ks[0] != 1 || ks[1] != 1) raise(ErrorKind::InvalidArgument, "attention projections must be 1x1");
    if (ks[2] != tokens.dim(2))
        raise(ErrorKind::Shape, "attention projection expects " + std::to_string(ks[2]) + " channels, tokens have " +
                                    std::to_string(tokens.dim(2)));
    Tensor w = reshape(p.kernel, {ks[2], ks[3]});
    return add(matmul(tokens, w), p.bias);
}

Tensor attention_weights_tokens(const Tensor& tokens, const NonlocalAttentionParams& p) {
    Tensor q, k;
    switch (p.variant) {
        case SelfAttentionVariant::FullProjection:
            q = project_tokens(tokens, p.query);
            k = project_tokens(tokens, p.key);
            break;
        case SelfAttentionVariant::SharedProjection:
            q = project_tokens(tokens, p.shared);
            k = q;
            break;
        case SelfAttentionVariant::Weightless:
            q = tokens;
            k = tokens;
            break;
    }
    Tensor sim = matmul(q, transpose(k, {0, 2, 1}));  // [N,L,L]
    return softmax(sim, 2);
}

Tensor tokens_of(const Tensor& x) {
    return reshape(x, {x.dim(0), x.dim(1) * x.dim(2), x.dim(3)});
}

// Integer pooling factor that brings H*W under the budget, preserving
// divisibility. Non-divisible extents stop early (best effort).
}  // namespace

int budget_pool_factor(int h, int w, int token_budget) {
    int f = 1;
    while (static_cast<std::int64_t>(h / f) * (w / f) > token_budget && h % (2 * f) == 0 && w % (2 * f) == 0)
        f *= 2;
    return f;
}

NonlocalAttentionParams make_nonlocal_attention(int c, SelfAttentionVariant variant, std::uint64_t seed) {
    NonlocalAttentionParams p;
    p.variant = variant;
    switch (variant) {
        case SelfAttentionVariant::FullProjection:
            p.query = make_conv2d(1, 1, c, c, 1, Padding::Same, rng::key(seed, "attn.q"));
            p.key = make_conv2d(1, 1, c, c, 1, Padding::Same, rng::key(seed, "attn.k"));
            p.value = make_conv2d(1, 1, c, c, 1, Padding::Same, rng::key(seed, "attn.v"));
            break;
        case SelfAttentionVariant::SharedProjection:
            p.shared = make_conv2d(1, 1, c, c, 1, Padding::Same, rng::key(seed, "attn.shared"));
            break;
        case SelfAttentionVariant::Weightless:
            break;
    }
    return p;
}

void NonlocalAttentionParams::collect(const std::string& prefix, NamedTensors& out) const {
    switch (variant) {
        case SelfAttentionVariant::FullProjection:
            query.collect(prefix + ".query", out);
            key.collect(prefix + ".key", out);
            value.collect(prefix + ".value", out);
            break;
        case SelfAttentionVariant::SharedProjection:
            shared.collect(prefix + ".shared", out);
            break;
        case SelfAttentionVariant::Weightless:
            break;
    }
}

Tensor nonlocal_attention_weights(const Tensor& x, const NonlocalAttentionParams& p) {
    if (x.ndim() != 4) raise(ErrorKind::Shape, "nonlocal attention expects [N,H,W,C]");
    return attention_weights_tokens(tokens_of(x), p);
}

Tensor nonlocal_self_attention(const Tensor& x, const NonlocalAttentionParams& p) {
    if (x.ndim() != 4) raise(ErrorKind::Shape, "nonlocal attention expects [N,H,W,C]");
    Tensor tokens = tokens_of(x);
    Tensor weights = attention_weights_tokens(tokens, p);
    Tensor v;
    switch (p.variant) {
        case SelfAttentionVariant::FullProjection:
            v = project_tokens(tokens, p.value);
            break;
        case SelfAttentionVariant::SharedProjection:
            v = project_tokens(tokens, p.shared);
            break;
        case SelfAttentionVariant::Weightless:
            v = tokens;
            break;
    }
    return reshape(matmul(weights, v, /*canonical_reduce=*/true), x.shape());
}

DualAttentionGateParams make_dual_gate(int c_x, int c_g, GateMode mode, SelfAttentionVariant variant,
                                       int token_budget, std::uint64_t seed) {
    DualAttentionGateParams p;
    p.mode = mode;
    p.variant = variant;
    p.token_budget = token_budget;
    if (mode == GateMode::None) return p;
    if (mode == GateMode::SelfAttn || mode == GateMode::Dual) {
        p.self_x = make_nonlocal_attention(c_x, variant, rng::key(seed, "gate.self_x"));
        p.self_g = make_nonlocal_attention(c_g, variant, rng::key(seed, "gate.self_g"));
        p.self_post_x = make_conv2d(1, 1, c_x, 1, 1, Padding::Same, rng::key(seed, "gate.post_x"));
        p.self_post_g = make_conv2d(1, 1, c_g, 1, 1, Padding::Same, rng::key(seed, "gate.post_g"));
    }
    if (mode == GateMode::Spatial || mode == GateMode::Dual) {
        // both branches mix into c_x channels before the final 1x1
        p.spatial_x = make_dw_separable(3, c_x, c_x, rng::key(seed, "gate.spatial_x"));
        p.spatial_g = make_dw_separable(3, c_g, c_x, rng::key(seed, "gate.spatial_g"));
        p.spatial_out = make_conv2d(1, 1, c_x, 1, 1, Padding::Same, rng::key(seed, "gate.spatial_out"));
    }
    return p;
}

void DualAttentionGateParams::collect(const std::string& prefix, NamedTensors& out) const {
    if (mode == GateMode::SelfAttn || mode == GateMode::Dual) {
        self_x.collect(prefix + ".self_x", out);
        self_g.collect(prefix + ".self_g", out);
        self_post_x.collect(prefix + ".self_post_x", out);
        self_post_g.collect(prefix + ".self_post_g", out);
    }
    if (mode == GateMode::Spatial || mode == GateMode::Dual) {
        spatial_x.collect(prefix + ".spatial_x", out);
        spatial_g.collect(prefix + ".spatial_g", out);
        spatial_out.collect(prefix + ".spatial_out", out);
    }
}

Tensor spatial_gate(const Tensor& x, const Tensor& g, const DualAttentionGateParams& p) {
    expect_aligned("spatial_gate", x, g);
    Tensor mixed = add(dw_separable_conv(x, p.spatial_x), dw_separable_conv(g, p.spatial_g));
    Tensor act = leaky_relu(mixed, p.leaky_slope);
    return sigmoid(conv2d(act, p.spatial_out));
}

Tensor self_attention_gate(const Tensor& x, const Tensor& g, const DualAttentionGateParams& p) {
    expect_aligned("self_attention_gate", x, g);
    const int h = x.dim(1), w = x.dim(2);
    const int f = budget_pool_factor(h, w, p.token_budget);
    Tensor xs = f > 1 ? avgpool(x, f, f) : x;
    Tensor gs = f > 1 ? avgpool(g, f, f) : g;
    Tensor ax = nonlocal_self_attention(xs, p.self_x);
    Tensor ag = nonlocal_self_attention(gs, p.self_g);
    Tensor alpha = sigmoid(add(conv2d(ax, p.self_post_x), conv2d(ag, p.self_post_g)));
    if (f > 1) alpha = bilinear_resize(alpha, h, w);  // post-sigmoid, so values stay in (0,1)
    return alpha;
}

Tensor apply_attention_gate(const Tensor& x, const Tensor& g, const DualAttentionGateParams& p) {
    switch (p.mode) {
        case GateMode::None:
            return x;
        case GateMode::Spatial:
            return mul(x, spatial_gate(x, g, p));
        case GateMode::SelfAttn:
            return mul(x, self_attention_gate(x, g, p));
        case GateMode::Dual:
            return mul(x, mul(self_attention_gate(x, g, p), spatial_gate(x, g, p)));
    }
    raise(ErrorKind::InvalidArgument, "apply_attention_gate: unknown gate mode");
}

}  // namespace cysto
