// Rough timing of the training step at a given input size. Not installed;
// used to keep the overfit acceptance gate inside its time budget.
#include <chrono>
#include <cstdio>

#include "cystonet/loss.hpp"
#include "cystonet/model.hpp"
#include "cystonet/rng.hpp"

using namespace cysto;
using clk = std::chrono::steady_clock;

static double secs(clk::time_point a, clk::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

int main(int argc, char** argv) {
    const int hw = argc > 1 ? std::atoi(argv[1]) : 64;
    ModelConfig mc;
    mc.input_h = mc.input_w = hw;
    Model m = build_model(mc);

    rng::Stream st(rng::key(1, "bench"));
    Tensor x = Tensor::zeros({1, hw, hw, 3});
    for (auto& v : x.mutable_data()) v = st.uniform();
    IntMask labels = IntMask::zeros({1, hw, hw});
    for (auto& l : labels.values) l = static_cast<std::uint8_t>(st.below(4));

    // warm-up + eval-mode forward
    auto t0 = clk::now();
    model_forward(m, x, false);
    auto t1 = clk::now();
    std::printf("eval forward: %.3fs\n", secs(t0, t1));

    t0 = clk::now();
    {
        GradTape tape;
        Tensor logits = model_forward(m, x, true);
        auto tf = clk::now();
        Tensor loss = combined_loss(logits, labels, {});
        auto tl = clk::now();
        tape.backward(loss);
        auto tb = clk::now();
        std::printf("train forward: %.3fs  loss: %.3fs  backward: %.3fs\n", secs(t0, tf),
                    secs(tf, tl), secs(tl, tb));
    }
    t1 = clk::now();
    std::printf("full step: %.3fs\n", secs(t0, t1));

    // per-ablation eval forward cost
    for (int dag = 0; dag < 2; ++dag)
        for (int tf = 0; tf < 2; ++tf) {
            ModelConfig ac = mc;
            ac.ablation.use_dag = dag != 0;
            ac.ablation.use_transformer = tf != 0;
            Model am = build_model(ac);
            model_forward(am, x, false);  // warm
            t0 = clk::now();
            model_forward(am, x, false);
            t1 = clk::now();
            std::printf("eval fwd dag=%d tf=%d: %.3fs\n", dag, tf, secs(t0, t1));
        }

    // raw matmul throughput at the dominant attention shapes
    auto time_mm = [&](int m2, int k2, int n2) {
        Tensor a = Tensor::zeros({1, m2, k2});
        Tensor b = Tensor::zeros({1, k2, n2});
        for (auto& v : a.mutable_data()) v = st.uniform();
        for (auto& v : b.mutable_data()) v = st.uniform();
        auto s0 = clk::now();
        Tensor c2 = matmul(a, b);
        auto s1 = clk::now();
        const double gmac = double(m2) * k2 * n2 / 1e9;
        std::printf("matmul %dx%dx%d: %.3fs (%.2f GMAC/s)\n", m2, k2, n2, secs(s0, s1),
                    gmac / secs(s0, s1));
    };
    time_mm(1024, 96, 1024);
    time_mm(1024, 1024, 96);
    time_mm(1024, 48, 1024);
    time_mm(1024, 1024, 48);
    return 0;
}
