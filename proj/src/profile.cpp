#include "cystonet/profile.hpp"

#include <cstdio>

namespace cysto {

namespace {

std::int64_t count_params(const NamedTensors& tensors) {
    std::int64_t total = 0;
    for (auto& [name, t] : tensors)
        if (t.requires_grad()) total += t.numel();
    return total;
}

template <class P>
std::int64_t params_of(const P& p, const char* tag = "x") {
    NamedTensors named;
    p.collect(tag, named);
    return count_params(named);
}

std::int64_t conv_macs(std::int64_t h, std::int64_t w, int k, int c_in, int c_out) {
    return h * w * k * k * c_in * c_out;
}

std::int64_t dwsep_macs(std::int64_t h, std::int64_t w, int k, int c_in, int c_out) {
    return h * w * k * k * c_in + h * w * c_in * c_out;
}

std::int64_t nonlocal_macs(std::int64_t l, int c, SelfAttentionVariant variant) {
    std::int64_t proj = 0;
    if (variant == SelfAttentionVariant::FullProjection) proj = 3 * l * c * c;
    if (variant == SelfAttentionVariant::SharedProjection) proj = l * c * c;
    return proj + 2 * l * l * c;  // QK^T and the weighted sum
}

std::int64_t gate_macs(const DualAttentionGateParams& p, std::int64_t h, std::int64_t w, int c_x, int c_g) {
    std::int64_t macs = 0;
    if (p.mode == GateMode::Spatial || p.mode == GateMode::Dual) {
        macs += dwsep_macs(h, w, 3, c_x, c_x);
        macs += dwsep_macs(h, w, 3, c_g, c_x);
        macs += conv_macs(h, w, 1, c_x, 1);
    }
    if (p.mode == GateMode::SelfAttn || p.mode == GateMode::Dual) {
        const int f = budget_pool_factor(static_cast<int>(h), static_cast<int>(w), p.token_budget);
        const std::int64_t l = (h / f) * (w / f);
        macs += nonlocal_macs(l, c_x, p.variant) + nonlocal_macs(l, c_g, p.variant);
        macs += l * c_x + l * c_g;  // 1x1 reductions to the gate channel
    }
    return macs;
}

std::int64_t transformer_macs(const TransformerConfig& cfg, std::int64_t l) {
    const std::int64_t e = cfg.embed_dim, hd = cfg.head_dim, heads = cfg.num_heads;
    const std::int64_t per_head = 3 * l * e * hd + 2 * l * l * hd;
    const std::int64_t out_proj = l * heads * hd * e;
    const std::int64_t mlp = 2 * l * e * cfg.mlp_hidden();
    return heads * per_head + out_proj + mlp;
}

}  // namespace

std::int64_t ProfileReport::total_params() const {
    std::int64_t t = 0;
    for (auto& e : entries) t += e.params;
    return t;
}

std::int64_t ProfileReport::total_macs() const {
    std::int64_t t = 0;
    for (auto& e : entries) t += e.macs;
    return t;
}

std::int64_t ProfileReport::group_params(const std::string& group) const {
    std::int64_t t = 0;
    for (auto& e : entries)
        if (e.group == group) t += e.params;
    return t;
}

std::int64_t ProfileReport::group_macs(const std::string& group) const {
    std::int64_t t = 0;
    for (auto& e : entries)
        if (e.group == group) t += e.macs;
    return t;
}

std::string ProfileReport::to_text() const {
    std::string out;
    char line[160];
    for (const auto& e : entries) {
        std::snprintf(line, sizeof line, "entry.%s.params = %lld\nentry.%s.group = %s\nentry.%s.macs = %lld\n",
                      e.name.c_str(), static_cast<long long>(e.params), e.name.c_str(), e.group.c_str(),
                      e.name.c_str(), static_cast<long long>(e.macs));
        out += line;
    }
    for (const char* g : {"baseline", "dag_gates", "transformer"}) {
        std::snprintf(line, sizeof line, "group.%s.params = %lld\ngroup.%s.macs = %lld\n", g,
                      static_cast<long long>(group_params(g)), g, static_cast<long long>(group_macs(g)));
        out += line;
    }
    std::snprintf(line, sizeof line, "total.params = %lld\ntotal.macs = %lld\n",
                  static_cast<long long>(total_params()), static_cast<long long>(total_macs()));
    out += line;
    std::snprintf(line, sizeof line, "total.gflops_mac = %.7f\ntotal.gflops_muladd = %.7f\n",
                  total_macs() / 1e9, 2.0 * total_macs() / 1e9);
    out += line;
    return out;
}

ProfileReport profile_model(const Model& m) {
    const ModelConfig& cfg = m.config;
    const auto& ch = cfg.stage_channels;
    const int s = cfg.stages();
    ProfileReport report;

    auto level_h = [&](int i) { return static_cast<std::int64_t>(cfg.input_h) >> i; };
    auto level_w = [&](int i) { return static_cast<std::int64_t>(cfg.input_w) >> i; };

    for (int i = 0; i < s; ++i) {
        const int c_in = i == 0 ? cfg.in_channels : ch[i - 1];
        report.entries.push_back({"enc" + std::to_string(i), "baseline", params_of(m.encoder[i]),
                                  dwsep_macs(level_h(i), level_w(i), 3, c_in, ch[i])});
    }

    const std::int64_t bh = level_h(s - 1), bw = level_w(s - 1);
    if (cfg.ablation.use_transformer) {
        report.entries.push_back({"bottleneck", "transformer", params_of(m.bottleneck_attn),
                                  transformer_macs(cfg.transformer, bh * bw)});
    } else {
        report.entries.push_back({"bottleneck", "baseline", params_of(m.bottleneck_conv),
                                  dwsep_macs(bh, bw, 3, ch[s - 1], ch[s - 1])});
    }

    for (std::size_t i = 0; i < m.gates.size(); ++i)
        report.entries.push_back({"gate" + std::to_string(i), "dag_gates", params_of(m.gates[i]),
                                  gate_macs(m.gates[i], level_h(static_cast<int>(i)),
                                            level_w(static_cast<int>(i)), ch[i], ch[i + 1])});

    for (int i = 0; i < s - 1; ++i)
        report.entries.push_back({"dec" + std::to_string(i), "baseline", params_of(m.decoder[i]),
                                  dwsep_macs(level_h(i), level_w(i), 3, ch[i + 1] + ch[i], ch[i])});

    report.entries.push_back(
        {"head", "baseline", params_of(m.head), conv_macs(level_h(0), level_w(0), 1, ch[0], cfg.num_classes)});
    return report;
}

}  // namespace cysto
