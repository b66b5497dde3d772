// Acceptance checks for the full stack. Each criterion prints exactly one
// "criterion N: PASS/FAIL - detail" line; the exit code is nonzero if any
// fail. Pass criterion numbers as arguments to run a subset.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "cystonet/attention_gate.hpp"
#include "cystonet/data.hpp"
#include "cystonet/loss.hpp"
#include "cystonet/metrics.hpp"
#include "cystonet/model.hpp"
#include "cystonet/nn.hpp"
#include "cystonet/profile.hpp"
#include "cystonet/tensor.hpp"
#include "cystonet/train.hpp"
#include "cystonet/transformer.hpp"
#include "oracles.hpp"

namespace {

using namespace cysto;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

Tensor rand_t(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0, bool rg = false) {
    return Tensor::from_data(shape, oracle::random_uniform(shape_numel(shape), lo, hi, seed), rg);
}

IntMask rand_mask(Shape shape, int classes, std::uint64_t seed) {
    IntMask m = IntMask::zeros(shape);
    for (std::int64_t i = 0; i < m.numel(); ++i)
        m.values[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(oracle::mix64(seed + static_cast<std::uint64_t>(i)) % static_cast<std::uint64_t>(classes));
    return m;
}

std::vector<Tensor> trainable_of(const NamedTensors& named) {
    std::vector<Tensor> out;
    for (const auto& [name, t] : named)
        if (t.requires_grad()) out.push_back(t);
    return out;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. Finite-difference gradient battery over every differentiable operator.

Outcome criterion_gradients() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_name = "none";
    long checked = 0;
    std::vector<std::string> failures;

    auto run = [&](const std::string& name, const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                   std::vector<Tensor> inputs, long coords = -1, double eps = 1e-5) {
        oracle::FdResult r = oracle::fd_check(fn, std::move(inputs), eps, coords, 7);
        checked += r.checked;
        if (r.max_rel > worst) {
            worst = r.max_rel;
            worst_name = name;
        }
        if (!(r.max_rel < 1e-4)) failures.push_back(fmt("%s rel %.3g", name.c_str(), r.max_rel));
    };

    {
        Conv2DParams p = make_conv2d(3, 3, 3, 4, 1, Padding::Same, 101);
        Tensor x = rand_t({1, 6, 6, 3}, 102, -1, 1, true);
        Tensor w = rand_t({1, 6, 6, 4}, 103);
        run("conv2d_same", [&](const std::vector<Tensor>& in) {
            Conv2DParams q{in[1], in[2], p.stride, p.padding};
            return sum(mul(conv2d(in[0], q), w));
        }, {x, p.kernel, p.bias});
    }
    {
        Conv2DParams p = make_conv2d(3, 3, 2, 2, 2, Padding::Valid, 104);
        Tensor x = rand_t({1, 7, 7, 2}, 105, -1, 1, true);
        Tensor w = rand_t({1, 3, 3, 2}, 106);
        run("conv2d_valid_stride2", [&](const std::vector<Tensor>& in) {
            Conv2DParams q{in[1], in[2], p.stride, p.padding};
            return sum(mul(conv2d(in[0], q), w));
        }, {x, p.kernel, p.bias});
    }
    {
        DWSeparableParams p = make_dw_separable(3, 2, 3, 107);
        Tensor x = rand_t({1, 5, 5, 2}, 108, -1, 1, true);
        Tensor w = rand_t({1, 5, 5, 3}, 109);
        run("dw_separable", [&](const std::vector<Tensor>& in) {
            DWSeparableParams q{in[1], in[2], Conv2DParams{in[3], in[4], 1, Padding::Same}};
            return sum(mul(dw_separable_conv(in[0], q), w));
        }, {x, p.depthwise_kernel, p.depthwise_bias, p.pointwise.kernel, p.pointwise.bias});
    }
    {
        BatchNormParams p = make_batchnorm(3);
        Tensor x = rand_t({2, 4, 4, 3}, 110, -1, 1, true);
        Tensor w = rand_t({2, 4, 4, 3}, 111);
        run("batchnorm_train", [&](const std::vector<Tensor>&) {
            return sum(mul(batchnorm(x, p, true), w));
        }, {x, p.gamma, p.beta});
    }
    for (SelfAttentionVariant v :
         {SelfAttentionVariant::FullProjection, SelfAttentionVariant::SharedProjection, SelfAttentionVariant::Weightless}) {
        NonlocalAttentionParams p = make_nonlocal_attention(4, v, 120 + static_cast<int>(v));
        Tensor x = rand_t({1, 3, 3, 4}, 125 + static_cast<int>(v), -1, 1, true);
        Tensor w = rand_t({1, 3, 3, 4}, 130 + static_cast<int>(v));
        NamedTensors named;
        p.collect("nl", named);
        std::vector<Tensor> inputs{x};
        for (Tensor& t : trainable_of(named)) inputs.push_back(t);
        run(fmt("nonlocal_%s", variant_name(v)), [&](const std::vector<Tensor>&) {
            return sum(mul(nonlocal_self_attention(x, p), w));
        }, inputs);
    }
    {
        DualAttentionGateParams p = make_dual_gate(5, 6, GateMode::Spatial, SelfAttentionVariant::FullProjection, 1024, 140);
        Tensor x = rand_t({1, 4, 4, 5}, 141, -1, 1, true);
        Tensor g = rand_t({1, 4, 4, 6}, 142, -1, 1, true);
        Tensor w = rand_t({1, 4, 4, 5}, 143);
        NamedTensors named;
        p.collect("gate", named);
        std::vector<Tensor> inputs{x, g};
        for (Tensor& t : trainable_of(named)) inputs.push_back(t);
        run("spatial_gate", [&](const std::vector<Tensor>&) {
            return sum(mul(apply_attention_gate(x, g, p), w));
        }, inputs);
    }
    {
        // token budget 4 on a 4x4 grid forces the pooled-attention path
        DualAttentionGateParams p = make_dual_gate(4, 4, GateMode::SelfAttn, SelfAttentionVariant::FullProjection, 4, 150);
        Tensor x = rand_t({1, 4, 4, 4}, 151, -1, 1, true);
        Tensor g = rand_t({1, 4, 4, 4}, 152, -1, 1, true);
        Tensor w = rand_t({1, 4, 4, 4}, 153);
        NamedTensors named;
        p.collect("gate", named);
        std::vector<Tensor> inputs{x, g};
        for (Tensor& t : trainable_of(named)) inputs.push_back(t);
        run("self_attention_gate_pooled", [&](const std::vector<Tensor>&) {
            return sum(mul(apply_attention_gate(x, g, p), w));
        }, inputs);
    }
    {
        DualAttentionGateParams p = make_dual_gate(3, 4, GateMode::Dual, SelfAttentionVariant::Weightless, 1024, 160);
        Tensor x = rand_t({1, 4, 4, 3}, 161, -1, 1, true);
        Tensor g = rand_t({1, 4, 4, 4}, 162, -1, 1, true);
        Tensor w = rand_t({1, 4, 4, 3}, 163);
        NamedTensors named;
        p.collect("gate", named);
        std::vector<Tensor> inputs{x, g};
        for (Tensor& t : trainable_of(named)) inputs.push_back(t);
        run("dual_gate", [&](const std::vector<Tensor>&) {
            return sum(mul(apply_attention_gate(x, g, p), w));
        }, inputs);
    }
    {
        TransformerConfig tc;
        tc.embed_dim = 6;
        tc.num_heads = 2;
        tc.head_dim = 3;
        TransformerBlockParams p = make_transformer_block(tc, 170);
        Tensor x = rand_t({1, 3, 3, 6}, 171, -1, 1, true);
        Tensor w = rand_t({1, 3, 3, 6}, 172);
        NamedTensors named;
        p.collect("tf", named);
        std::vector<Tensor> inputs{x};
        for (Tensor& t : trainable_of(named)) inputs.push_back(t);
        // eps 1e-4: several norm/projection coordinates have exactly-zero
        // derivatives, where a smaller step leaves only cancellation noise
        run("mhsa", [&](const std::vector<Tensor>&) {
            return sum(mul(mhsa(x, p), w));
        }, inputs, -1, 1e-4);
        run("transformer_block", [&](const std::vector<Tensor>&) {
            return sum(mul(transformer_block(x, p), w));
        }, inputs, -1, 1e-4);
    }
    {
        Tensor logits = rand_t({1, 5, 5, 4}, 180, -2, 2, true);
        IntMask labels = rand_mask({1, 5, 5}, 4, 181);
        run("dice_loss", [&](const std::vector<Tensor>& in) { return dice_loss(in[0], labels); }, {logits});
        run("scce_loss", [&](const std::vector<Tensor>& in) { return scce_loss(in[0], labels); }, {logits});
        run("combined_loss", [&](const std::vector<Tensor>& in) {
            return combined_loss(in[0], labels, LossWeights{0.6, 0.4});
        }, {logits});
    }
    {
        ModelConfig mc;
        mc.input_h = mc.input_w = 8;
        mc.num_classes = 3;
        mc.stage_channels = {4, 6};
        mc.transformer.embed_dim = 6;
        mc.transformer.num_heads = 2;
        mc.transformer.head_dim = 3;
        mc.gate_token_budget = 1024;
        mc.seed = 190;
        Model m = build_model(mc);
        Tensor x = rand_t({1, 8, 8, 3}, 191, 0, 1, true);
        IntMask labels = rand_mask({1, 8, 8}, 3, 192);
        std::vector<Tensor> inputs{x};
        for (Tensor& t : m.trainable()) inputs.push_back(t);
        run("full_model", [&](const std::vector<Tensor>&) {
            return combined_loss(model_forward(m, x, true), labels, LossWeights{0.6, 0.4});
        }, inputs, 3);
    }

    const double elapsed = secs_since(t0);
    if (!failures.empty()) {
        std::string joined;
        for (const auto& f : failures) joined += (joined.empty() ? "" : "; ") + f;
        return {false, fmt("%s (%.1fs)", joined.c_str(), elapsed)};
    }
    return {elapsed < 300.0, fmt("%ld derivatives, worst rel err %.2e (%s), %.1fs", checked, worst, worst_name.c_str(), elapsed)};
}

// ---------------------------------------------------------------------------
// 2. Vectorized non-local attention vs the O(L^2) nested-loop reference.

const double* conv_mat(const Conv2DParams& p) { return p.kernel.data().data(); }
const double* conv_vec(const Conv2DParams& p) { return p.bias.data().data(); }

Outcome criterion_attention_oracle() {
    double worst = 0.0;
    int cases = 0;
    const int c = 5;
    for (SelfAttentionVariant v :
         {SelfAttentionVariant::FullProjection, SelfAttentionVariant::SharedProjection, SelfAttentionVariant::Weightless}) {
        for (auto [h, w] : std::vector<std::pair<int, int>>{{2, 2}, {3, 3}, {4, 4}}) {
            const int n = 2, l = h * w;
            NonlocalAttentionParams p = make_nonlocal_attention(c, v, 200 + 10 * static_cast<int>(v) + l);
            Tensor x = rand_t({n, h, w, c}, 230 + l + static_cast<int>(v), -2, 2);
            oracle::LoopAttention ref;
            switch (v) {
                case SelfAttentionVariant::FullProjection:
                    ref = oracle::nonlocal_attention_loop(x.data(), n, l, c, conv_mat(p.query), conv_vec(p.query),
                                                          conv_mat(p.key), conv_vec(p.key), conv_mat(p.value),
                                                          conv_vec(p.value));
                    break;
                case SelfAttentionVariant::SharedProjection:
                    ref = oracle::nonlocal_attention_loop(x.data(), n, l, c, conv_mat(p.shared), conv_vec(p.shared),
                                                          conv_mat(p.shared), conv_vec(p.shared), conv_mat(p.shared),
                                                          conv_vec(p.shared));
                    break;
                case SelfAttentionVariant::Weightless:
                    ref = oracle::nonlocal_attention_loop(x.data(), n, l, c, nullptr, nullptr, nullptr, nullptr, nullptr,
                                                          nullptr);
                    break;
            }
            Tensor out = nonlocal_self_attention(x, p);
            Tensor wts = nonlocal_attention_weights(x, p);
            for (std::size_t i = 0; i < ref.output.size(); ++i)
                worst = std::max(worst, std::abs(out.data()[i] - ref.output[i]));
            for (std::size_t i = 0; i < ref.weights.size(); ++i)
                worst = std::max(worst, std::abs(wts.data()[i] - ref.weights[i]));
            ++cases;
        }
    }
    return {worst < 1e-10, fmt("%d variant/size cases, max abs deviation %.2e", cases, worst)};
}

// ---------------------------------------------------------------------------
// 3. Parameter and MAC counts exactly affine in the number of heads.

Outcome criterion_head_scaling() {
    std::vector<std::int64_t> params, macs;
    for (int h = 1; h <= 10; ++h) {
        ModelConfig mc;
        mc.transformer.num_heads = h;
        ProfileReport r = profile_model(build_model(mc));
        params.push_back(r.total_params());
        macs.push_back(r.total_macs());
    }
    bool affine = true;
    for (std::size_t i = 2; i < params.size(); ++i) {
        if ((params[i] - params[i - 1]) != (params[i - 1] - params[i - 2])) affine = false;
        if ((macs[i] - macs[i - 1]) != (macs[i - 1] - macs[i - 2])) affine = false;
    }

    // wide-head preset: per-head parameter step at head_dim = embed_dim = 128
    ModelConfig wide;
    wide.transformer.head_dim = 128;
    wide.transformer.num_heads = 1;
    const std::int64_t p1 = profile_model(build_model(wide)).total_params();
    wide.transformer.num_heads = 2;
    const std::int64_t p2 = profile_model(build_model(wide)).total_params();
    const std::int64_t step = p2 - p1;

    return {affine, fmt("param step %lld/head, mac step %lld/head, zero second differences; wide-head step %lld (65920 %s)",
                        static_cast<long long>(params[1] - params[0]), static_cast<long long>(macs[1] - macs[0]),
                        static_cast<long long>(step), step == 65920 ? "matches" : "differs")};
}

// ---------------------------------------------------------------------------
// 4. Ablation cost additivity, exact in both parameters and MACs.

Outcome criterion_ablation_additivity() {
    auto measure = [](ModelConfig mc, bool dag, bool attn) {
        mc.ablation.use_dag = dag;
        mc.ablation.use_transformer = attn;
        ProfileReport r = profile_model(build_model(mc));
        return std::pair<std::int64_t, std::int64_t>{r.total_params(), r.total_macs()};
    };

    ModelConfig alt1;
    alt1.input_h = alt1.input_w = 96;
    alt1.num_classes = 3;
    alt1.stage_channels = {8, 16, 32};
    alt1.transformer.embed_dim = 32;
    alt1.transformer.num_heads = 3;
    alt1.transformer.head_dim = 16;
    alt1.gate_variant = SelfAttentionVariant::SharedProjection;
    alt1.gate_token_budget = 256;

    ModelConfig alt2;
    alt2.input_h = alt2.input_w = 128;
    alt2.stage_channels = {6, 10, 14, 18};
    alt2.transformer.embed_dim = 18;
    alt2.transformer.num_heads = 5;
    alt2.transformer.head_dim = 8;
    alt2.gate_variant = SelfAttentionVariant::Weightless;
    alt2.gate_token_budget = 64;

    bool ok = true;
    std::string detail;
    int idx = 0;
    for (const ModelConfig& mc : {ModelConfig{}, alt1, alt2}) {
        auto full = measure(mc, true, true);
        auto base = measure(mc, false, false);
        auto dag = measure(mc, true, false);
        auto attn = measure(mc, false, true);
        const bool p_ok = (full.first - base.first) == (dag.first - base.first) + (attn.first - base.first);
        const bool m_ok = (full.second - base.second) == (dag.second - base.second) + (attn.second - base.second);
        ok = ok && p_ok && m_ok;
        if (idx++ == 0)
            detail = fmt("default config params base %lld, +gates %lld, +bottleneck attention %lld, full %lld",
                         static_cast<long long>(base.first), static_cast<long long>(dag.first - base.first),
                         static_cast<long long>(attn.first - base.first), static_cast<long long>(full.first));
    }
    return {ok, detail + (ok ? "; additive in params and MACs for all 3 configs" : "; ADDITIVITY VIOLATED")};
}

// ---------------------------------------------------------------------------
// 5. Gate cost ordering across variants and modes.

Outcome criterion_gate_ordering() {
    auto gate_params = [](SelfAttentionVariant v, GateMode mode) {
        ModelConfig mc;
        mc.gate_variant = v;
        mc.gate_mode = mode;
        return profile_model(build_model(mc)).group_params("dag_gates");
    };
    const std::int64_t weightless = gate_params(SelfAttentionVariant::Weightless, GateMode::Dual);
    const std::int64_t shared = gate_params(SelfAttentionVariant::SharedProjection, GateMode::Dual);
    const std::int64_t full = gate_params(SelfAttentionVariant::FullProjection, GateMode::Dual);
    const std::int64_t spatial_only = gate_params(SelfAttentionVariant::FullProjection, GateMode::Spatial);
    const std::int64_t self_only = gate_params(SelfAttentionVariant::FullProjection, GateMode::SelfAttn);
    const bool variant_ok = weightless <= shared && shared <= full;
    const bool dual_ok = full > std::max(spatial_only, self_only);
    return {variant_ok && dual_ok,
            fmt("gate params: weightless %lld <= shared %lld <= full %lld; dual %lld > max(spatial %lld, self %lld)",
                static_cast<long long>(weightless), static_cast<long long>(shared), static_cast<long long>(full),
                static_cast<long long>(full), static_cast<long long>(spatial_only), static_cast<long long>(self_only))};
}

// ---------------------------------------------------------------------------
// 6. Bitwise token-permutation equivariance of the positional-encoding-free
//    attention operators.

std::vector<int> seeded_permutation(int l, std::uint64_t seed) {
    std::vector<int> perm(static_cast<std::size_t>(l));
    for (int i = 0; i < l; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = l - 1; i > 0; --i) {
        const int j = static_cast<int>(oracle::mix64(seed + static_cast<std::uint64_t>(i)) % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

Tensor permute_tokens(const Tensor& x, const std::vector<int>& perm) {
    const int l = static_cast<int>(perm.size());
    const int c = static_cast<int>(x.dim(3));
    std::vector<double> out(x.data().size());
    for (int i = 0; i < l; ++i)
        std::memcpy(out.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(c),
                    x.data().data() + static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * static_cast<std::size_t>(c),
                    static_cast<std::size_t>(c) * sizeof(double));
    return Tensor::from_data(x.shape(), std::move(out));
}

bool tokens_match_bitwise(const Tensor& permuted_out, const Tensor& out, const std::vector<int>& perm, int c) {
    for (std::size_t i = 0; i < perm.size(); ++i)
        if (std::memcmp(permuted_out.data().data() + i * static_cast<std::size_t>(c),
                        out.data().data() + static_cast<std::size_t>(perm[i]) * static_cast<std::size_t>(c),
                        static_cast<std::size_t>(c) * sizeof(double)) != 0)
            return false;
    return true;
}

Outcome criterion_permutation_equivariance() {
    int cases = 0, failed = 0;
    for (auto [h, w] : std::vector<std::pair<int, int>>{{2, 2}, {2, 3}, {3, 3}, {3, 4}}) {
        const int l = h * w;
        std::vector<std::vector<int>> perms{seeded_permutation(l, 700 + static_cast<std::uint64_t>(l))};
        perms.emplace_back(perms[0].rbegin(), perms[0].rend());

        NonlocalAttentionParams nl = make_nonlocal_attention(7, SelfAttentionVariant::Weightless, 0);
        Tensor x = rand_t({1, h, w, 7}, 710 + static_cast<std::uint64_t>(l), -2, 2);
        Tensor y = nonlocal_self_attention(x, nl);

        TransformerConfig tc;
        tc.embed_dim = 8;
        tc.num_heads = 2;
        tc.head_dim = 4;
        TransformerBlockParams tb = make_transformer_block(tc, 720 + static_cast<std::uint64_t>(l));
        Tensor xm = rand_t({1, h, w, 8}, 730 + static_cast<std::uint64_t>(l), -2, 2);
        Tensor ym = mhsa(xm, tb);

        for (const auto& perm : perms) {
            ++cases;
            if (!tokens_match_bitwise(nonlocal_self_attention(permute_tokens(x, perm), nl), y, perm, 7)) ++failed;
            ++cases;
            if (!tokens_match_bitwise(mhsa(permute_tokens(xm, perm), tb), ym, perm, 8)) ++failed;
        }
    }
    return {failed == 0, fmt("%d operator/permutation cases, %d bitwise mismatches", cases, failed)};
}

// ---------------------------------------------------------------------------
// 7. Loss identities: uniform cross-entropy, weight linearity, dice-from-IoU.

Outcome criterion_loss_identities() {
    double worst_uniform = 0.0;
    for (int classes : {2, 3, 4, 7}) {
        Tensor logits = Tensor::full({1, 3, 3, classes}, 0.7);
        IntMask labels = rand_mask({1, 3, 3}, classes, 800 + static_cast<std::uint64_t>(classes));
        worst_uniform = std::max(worst_uniform, std::abs(scce_loss(logits, labels).item() - std::log(double(classes))));
    }

    Tensor logits = rand_t({2, 4, 4, 4}, 810, -2, 2);
    IntMask labels = rand_mask({2, 4, 4}, 4, 811);
    const double d = dice_loss(logits, labels).item();
    const double s = scce_loss(logits, labels).item();
    const bool weights_exact = combined_loss(logits, labels, LossWeights{1.0, 0.0}).item() == d &&
                               combined_loss(logits, labels, LossWeights{0.0, 1.0}).item() == s;

    double worst_dice = 0.0;
    long classes_checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::uint64_t seed = 820 + static_cast<std::uint64_t>(trial) * 2;
        IntMask pred = rand_mask({1, 8, 8}, 4, seed);
        IntMask truth = rand_mask({1, 8, 8}, 4, seed + 1);
        ConfusionAccumulator acc = evaluate_masks(pred, truth, 4);
        for (int c = 0; c < 4; ++c) {
            if (!acc.present(c)) continue;
            ClassMetrics m = acc.cls(c);
            worst_dice = std::max(worst_dice, std::abs(m.dice - 2.0 * m.iou / (1.0 + m.iou)));
            ++classes_checked;
        }
    }

    const bool pass = worst_uniform <= 1e-9 && weights_exact && worst_dice <= 1e-12;
    return {pass, fmt("uniform-logit scce err %.2e, weight linearity %s, dice-vs-iou err %.2e over %ld class cases",
                      worst_uniform, weights_exact ? "exact" : "BROKEN", worst_dice, classes_checked)};
}

// ---------------------------------------------------------------------------
// 8. Overfit sanity on a tiny synthetic set, and the gated model must beat
//    (or match within noise) the plain encoder-decoder under the same budget.

Outcome criterion_overfit() {
    const auto t0 = Clock::now();
    std::vector<SampleRecord> records = synth_generate(8, 64, 64, 404);
    std::vector<SampleRecord> val{records[0]};

    ModelConfig mc;
    mc.input_h = mc.input_w = 64;
    mc.seed = 301;

    TrainRunConfig rc;
    rc.batch_size = 2;  // 4 optimizer steps per epoch; full-batch needs far more epochs
    rc.max_epochs = 200;
    rc.seed = 77;
    rc.adam.lr = 2e-3;
    rc.stop_at_train_iou = 0.95;

    TrainSession full_s = make_session(mc, rc);
    TrainResult full = train_loop(full_s, records, val);
    const double full_iou = full.history.back().train_iou;
    const double full_secs = secs_since(t0);

    ModelConfig base_mc = mc;
    base_mc.ablation.use_dag = false;
    base_mc.ablation.use_transformer = false;
    TrainRunConfig base_rc = rc;
    base_rc.max_epochs = full.epochs_run;  // identical epoch budget
    TrainSession base_s = make_session(base_mc, base_rc);
    TrainResult base = train_loop(base_s, records, val);
    const double base_iou = base.history.back().train_iou;

    const bool pass = full_iou > 0.95 && full_secs < 900.0 && base_iou <= full_iou + 0.02;
    return {pass, fmt("full model train mIoU %.4f after %d epochs (%.0fs); baseline %.4f under the same %d-epoch budget",
                      full_iou, full.epochs_run, full_secs, base_iou, full.epochs_run)};
}

// ---------------------------------------------------------------------------
// 9. Bit-identical reruns and exact save/load/resume continuation.

Outcome criterion_determinism() {
    ModelConfig mc;
    mc.input_h = mc.input_w = 16;
    mc.stage_channels = {6, 10};
    mc.transformer.embed_dim = 10;
    mc.transformer.num_heads = 2;
    mc.transformer.head_dim = 4;
    mc.seed = 5;

    TrainRunConfig rc;
    rc.batch_size = 3;
    rc.max_epochs = 3;
    rc.seed = 9;

    std::vector<SampleRecord> records = synth_generate(6, 16, 16, 99);
    std::vector<SampleRecord> train(records.begin(), records.end() - 1);
    std::vector<SampleRecord> val{records.back()};

    const fs::path root = fs::temp_directory_path() / fmt("cysto_acceptance_%ld", static_cast<long>(::getpid()));
    fs::remove_all(root);
    const fs::path dir_a = root / "a", dir_b = root / "b";
    fs::create_directories(dir_a);
    fs::create_directories(dir_b);

    TrainRunConfig rc_a = rc;
    rc_a.out_dir = dir_a.string();
    TrainSession sa = make_session(mc, rc_a);
    train_loop(sa, train, val);

    TrainRunConfig rc_b = rc;
    rc_b.out_dir = dir_b.string();
    TrainSession sb = make_session(mc, rc_b);
    train_loop(sb, train, val);

    const bool history_same = read_bytes(dir_a / "history.tsv") == read_bytes(dir_b / "history.tsv");
    const bool best_same = read_bytes(dir_a / "best.ckpt") == read_bytes(dir_b / "best.ckpt");
    const bool last_same = read_bytes(dir_a / "last.ckpt") == read_bytes(dir_b / "last.ckpt");

    TrainRunConfig rc4 = rc;
    rc4.max_epochs = 4;
    TrainSession uninterrupted = make_session(mc, rc4);
    TrainResult straight = train_loop(uninterrupted, train, val);
    const EpochStats& target = straight.history.back();

    TrainSession part = make_session(mc, rc4);
    for (int e = 0; e < 3; ++e) train_epoch(part, train, val);
    const fs::path mid = root / "mid.ckpt";
    save_session(mid.string(), part);
    TrainSession resumed = load_session(mid.string());
    const EpochStats cont = train_epoch(resumed, train, val);
    const double resume_delta = std::max(std::abs(cont.train_loss - target.train_loss), std::abs(cont.val_loss - target.val_loss));

    fs::remove_all(root);
    const bool pass = history_same && best_same && last_same && resume_delta <= 1e-9;
    return {pass, fmt("rerun files %s (history/best/last), resume epoch-4 loss delta %.2e",
                      history_same && best_same && last_same ? "bit-identical" : "DIFFER", resume_delta)};
}

// ---------------------------------------------------------------------------
// 10. Plateau scheduler contract.

Outcome criterion_scheduler() {
    PlateauScheduler s;
    s.factor = 0.1;
    s.patience = 3;
    s.min_delta = 1e-6;
    s.min_lr = 1e-6;
    s.lr = 1e-3;
    s.best = std::numeric_limits<double>::infinity();

    const std::vector<double> trace{1.0, 0.9, 0.9, 0.9, 0.9, 0.9};
    std::vector<int> reduced_at;
    for (std::size_t i = 0; i < trace.size(); ++i)
        if (s.observe(trace[i])) reduced_at.push_back(static_cast<int>(i) + 1);
    const bool single_ok = reduced_at.size() == 1 && reduced_at[0] == 5 && s.lr == 1e-3 * 0.1;

    PlateauScheduler f;
    f.factor = 0.1;
    f.patience = 2;
    f.min_delta = 1e-6;
    f.min_lr = 1e-5;
    f.lr = 1e-3;
    f.best = std::numeric_limits<double>::infinity();
    bool monotone = true;
    int reductions = 0;
    double prev = f.lr;
    f.observe(1.0);
    for (int i = 0; i < 20; ++i) {
        if (f.observe(1.0)) ++reductions;
        if (f.lr > prev) monotone = false;
        prev = f.lr;
    }
    const bool floor_ok = monotone && reductions == 2 && f.lr == f.min_lr;

    return {single_ok && floor_ok,
            fmt("one reduction at observation %d to lr %.0e; plateau tail: %d reductions, floored at %.0e",
                reduced_at.empty() ? -1 : reduced_at[0], s.lr, reductions, f.lr)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> chosen;
    for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));

    struct Entry {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const Entry entries[] = {
        {1, "operator gradients vs finite differences", criterion_gradients},
        {2, "non-local attention vs nested-loop oracle", criterion_attention_oracle},
        {3, "profile affine in head count", criterion_head_scaling},
        {4, "ablation cost additivity", criterion_ablation_additivity},
        {5, "gate variant cost ordering", criterion_gate_ordering},
        {6, "token permutation equivariance", criterion_permutation_equivariance},
        {7, "loss identities", criterion_loss_identities},
        {8, "synthetic overfit sanity", criterion_overfit},
        {9, "determinism and resume", criterion_determinism},
        {10, "plateau scheduler contract", criterion_scheduler},
    };

    bool all_pass = true;
    for (const Entry& e : entries) {
        if (!chosen.empty() && !chosen.count(e.id)) continue;
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception& ex) {
            o = {false, fmt("exception: %s", ex.what())};
        }
        std::printf("criterion %d (%s): %s - %s\n", e.id, e.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
