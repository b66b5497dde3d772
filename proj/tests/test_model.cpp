#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "cystonet/checkpoint.hpp"
#include "cystonet/profile.hpp"
#include "oracles.hpp"

using namespace cysto;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.input_h = c.input_w = 16;
    c.num_classes = 3;
    c.stage_channels = {4, 8};
    c.transformer.embed_dim = 8;
    c.transformer.num_heads = 2;
    c.transformer.head_dim = 4;
    c.seed = 5;
    return c;
}

Tensor rand_images(const ModelConfig& c, int n, std::uint64_t seed, bool grad = false) {
    Shape shape{n, c.input_h, c.input_w, c.in_channels};
    return Tensor::from_data(shape, oracle::random_uniform(shape_numel(shape), 0.0, 1.0, seed), grad);
}

bool same_state(const Model& a, const Model& b) {
    NamedTensors sa = a.named_state(), sb = b.named_state();
    if (sa.size() != sb.size()) return false;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (sa[i].first != sb[i].first) return false;
        const auto& da = sa[i].second.data();
        const auto& db = sb[i].second.data();
        if (da.size() != db.size()) return false;
        if (std::memcmp(da.data(), db.data(), da.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

// The loop enumerators mirror the profiler's counting convention (full
// kernel window at every output position) but count by brute iteration.
std::int64_t loop_conv_macs(std::int64_t h, std::int64_t w, int k, int c_in, int c_out) {
    std::int64_t n = 0;
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx)
                    for (int ci = 0; ci < c_in; ++ci) n += c_out;
    return n;
}

std::int64_t loop_dwsep_macs(std::int64_t h, std::int64_t w, int k, int c_in, int c_out) {
    return loop_conv_macs(h, w, k, c_in, 1) + loop_conv_macs(h, w, 1, c_in, c_out);
}

std::int64_t loop_matmul_macs(std::int64_t m, std::int64_t kk, std::int64_t n) {
    std::int64_t total = 0;
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < kk; ++j) total += n;
    return total;
}

std::int64_t loop_params(const Model& m) {
    std::int64_t total = 0;
    for (auto& [name, t] : m.named_state())
        if (t.requires_grad()) total += t.numel();
    return total;
}

}  // namespace

TEST_CASE("forward maps [1,64,64,3] to per-pixel class logits") {
    ModelConfig c;  // defaults except size
    c.input_h = c.input_w = 64;
    Model m = build_model(c);
    Tensor logits = model_forward(m, rand_images(c, 1, 2), false);
    CHECK(logits.shape() == Shape{1, 64, 64, 4});  // checked mode would reject NaN/Inf
    IntMask pred = model_predict(m, rand_images(c, 1, 3));
    CHECK(pred.shape == Shape{1, 64, 64});
    for (std::uint8_t v : pred.values) CHECK(v < 4);
}

TEST_CASE("same config and seed build identical models; eval forward repeats bitwise") {
    ModelConfig c = tiny_config();
    Model a = build_model(c), b = build_model(c);
    CHECK(same_state(a, b));

    Tensor x = rand_images(c, 2, 7);
    Tensor y1 = model_forward(a, x, false);
    Tensor y2 = model_forward(a, x, false);
    CHECK(std::memcmp(y1.data().data(), y2.data().data(), y1.numel() * sizeof(double)) == 0);

    ModelConfig other = c;
    other.seed = 6;
    CHECK(!same_state(a, build_model(other)));
}

TEST_CASE("all four ablation variants build and run") {
    for (bool dag : {false, true})
        for (bool tf : {false, true}) {
            ModelConfig c = tiny_config();
            c.ablation = {dag, tf};
            Model m = build_model(c);
            CHECK(model_forward(m, rand_images(c, 1, 4), true).shape() == Shape{1, 16, 16, 3});
        }
}

TEST_CASE("full-model gradients pass finite differences on a tiny config") {
    ModelConfig c = tiny_config();
    Model m = build_model(c);
    Tensor x = rand_images(c, 1, 9);
    auto fn = [&](const std::vector<Tensor>&) { return mean(model_forward(m, x, true)); };
    oracle::FdResult r = oracle::fd_check(fn, m.trainable(), 1e-5, 3);
    CHECK(r.checked >= 100);
    CHECK(r.max_rel < 1e-4);
}

TEST_CASE("profiler totals match the reflection and loop-enumeration oracles") {
    ModelConfig c = tiny_config();
    Model m = build_model(c);
    ProfileReport rep = profile_model(m);
    CHECK(rep.total_params() == loop_params(m));

    // independent MAC count for every entry of the tiny config
    const std::int64_t l = 8 * 8;  // bottleneck tokens
    std::int64_t macs = loop_dwsep_macs(16, 16, 3, 3, 4) + loop_dwsep_macs(8, 8, 3, 4, 8);  // encoder
    macs += 2 * (3 * loop_matmul_macs(l, 8, 4) + 2 * loop_matmul_macs(l, l, 4));  // per-head attn
    macs += loop_matmul_macs(l, 8, 8);                                            // out projection
    macs += 2 * loop_matmul_macs(l, 8, 16);                                       // mlp both ways
    const std::int64_t lg = 16 * 16;  // gate tokens, under the budget
    macs += 3 * loop_matmul_macs(lg, 4, 4) + 2 * loop_matmul_macs(lg, lg, 4);  // gate self path on x
    macs += 3 * loop_matmul_macs(lg, 8, 8) + 2 * loop_matmul_macs(lg, lg, 8);  // ... and on g
    macs += lg * 4 + lg * 8;                                                   // 1x1 gate reductions
    macs += loop_dwsep_macs(16, 16, 3, 4, 4) + loop_dwsep_macs(16, 16, 3, 8, 4) + lg * 4;  // spatial path
    macs += loop_dwsep_macs(16, 16, 3, 12, 4);                                             // decoder
    macs += loop_conv_macs(16, 16, 1, 4, 3);                                               // head
    CHECK(rep.total_macs() == macs);
}

TEST_CASE("ablation groups are additive for params and MACs") {
    ModelConfig base = tiny_config();
    ModelConfig mid;
    mid.input_h = mid.input_w = 32;
    mid.stage_channels = {8, 16, 32};
    mid.transformer.embed_dim = 32;
    mid.transformer.num_heads = 3;
    mid.transformer.head_dim = 8;
    ModelConfig full;  // paper-shaped default at 256x256
    for (const ModelConfig& proto : {base, mid, full}) {
        std::int64_t params[2][2], macs[2][2];
        for (int dag = 0; dag < 2; ++dag)
            for (int tf = 0; tf < 2; ++tf) {
                ModelConfig c = proto;
                c.ablation = {dag != 0, tf != 0};
                ProfileReport rep = profile_model(build_model(c));
                params[dag][tf] = rep.total_params();
                macs[dag][tf] = rep.total_macs();
            }
        CHECK(params[1][1] - params[0][0] == (params[1][0] - params[0][0]) + (params[0][1] - params[0][0]));
        CHECK(macs[1][1] - macs[0][0] == (macs[1][0] - macs[0][0]) + (macs[0][1] - macs[0][0]));
        CHECK(params[1][1] > params[0][0]);
    }
}

TEST_CASE("params ignore input size; conv MACs quadruple when H and W double") {
    ModelConfig small = tiny_config();
    ModelConfig large = small;
    large.input_h = large.input_w = 32;
    ProfileReport a = profile_model(build_model(small));
    ProfileReport b = profile_model(build_model(large));
    CHECK(a.total_params() == b.total_params());
    CHECK(b.group_macs("baseline") == 4 * a.group_macs("baseline"));
}

TEST_CASE("gate variants order weightless <= shared <= full; dual outweighs single paths") {
    auto gate_params = [](SelfAttentionVariant v, GateMode mode) {
        ModelConfig c = tiny_config();
        c.gate_variant = v;
        c.gate_mode = mode;
        return profile_model(build_model(c)).group_params("dag_gates");
    };
    const auto weightless = gate_params(SelfAttentionVariant::Weightless, GateMode::Dual);
    const auto shared = gate_params(SelfAttentionVariant::SharedProjection, GateMode::Dual);
    const auto full = gate_params(SelfAttentionVariant::FullProjection, GateMode::Dual);
    CHECK(weightless <= shared);
    CHECK(shared <= full);

    const auto spatial = gate_params(SelfAttentionVariant::FullProjection, GateMode::Spatial);
    const auto self_only = gate_params(SelfAttentionVariant::FullProjection, GateMode::SelfAttn);
    CHECK(full > spatial);
    CHECK(full > self_only);
    CHECK(full == spatial + self_only);
}

TEST_CASE("profiler params and MACs are exactly affine in the head count") {
    std::vector<std::int64_t> params, macs;
    for (int h = 1; h <= 10; ++h) {
        ModelConfig c = tiny_config();
        c.transformer.num_heads = h;
        ProfileReport rep = profile_model(build_model(c));
        params.push_back(rep.total_params());
        macs.push_back(rep.total_macs());
    }
    for (std::size_t i = 2; i < params.size(); ++i) {
        CHECK(params[i] - 2 * params[i - 1] + params[i - 2] == 0);
        CHECK(macs[i] - 2 * macs[i - 1] + macs[i - 2] == 0);
    }
    CHECK(params[1] > params[0]);
}

TEST_CASE("checkpoints round-trip bit-exactly and detect corruption") {
    const fs::path dir = fs::temp_directory_path() / "cysto_ckpt";
    fs::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();

    ModelConfig c = tiny_config();
    Model m = build_model(c);
    save_model(path, m);
    Model back = load_model_checkpoint(path);
    CHECK(same_state(m, back));
    CHECK(encode_model_config(back.config) == encode_model_config(c));

    // extra section: optimizer-style payload
    KvPairs kv = {{"adam.step", "17"}, {"sched.lr", "0.001"}};
    NamedTensors extra = {{"adam.m.head.bias", Tensor::from_data({3}, {1.0, 2.0, 3.0})}};
    save_checkpoint(path, c, m.named_state(), &kv, &extra);
    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.has_extra);
    CHECK(ck.extra_kv == kv);
    CHECK(ck.extra_tensors.at(0).second.data() == std::vector<double>{1.0, 2.0, 3.0});

    // flip one checksum byte near the end of the stream
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(0, std::ios::end);
    const auto size = static_cast<std::streamoff>(f.tellg());
    f.seekp(size - 2);
    char byte;
    f.seekg(size - 2);
    f.read(&byte, 1);
    byte = static_cast<char>(byte ^ 0x5a);
    f.seekp(size - 2);
    f.write(&byte, 1);
    f.close();
    try {
        load_checkpoint(path);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
    fs::remove_all(dir);
}

TEST_CASE("model config text encoding round-trips and rejects unknown keys") {
    ModelConfig c;
    c.stage_channels = {8, 16, 24};
    c.transformer.embed_dim = 24;
    c.transformer.mlp_ratio = 1.5;
    c.gate_variant = SelfAttentionVariant::SharedProjection;
    c.gate_mode = GateMode::Spatial;
    c.ablation = {true, false};
    c.seed = 99;
    ModelConfig d = decode_model_config(encode_model_config(c));
    CHECK(encode_model_config(d) == encode_model_config(c));
    CHECK_THROWS_AS(decode_model_config("bogus_key = 1\n"), Error);

    ModelConfig bad;
    bad.input_h = 100;  // not divisible by 8
    CHECK_THROWS_AS(build_model(bad), Error);
}
