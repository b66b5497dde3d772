#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cystonet/metrics.hpp"
#include "oracles.hpp"

using namespace cysto;

namespace {

IntMask mask_of(Shape shape, std::vector<std::uint8_t> values) {
    IntMask m = IntMask::zeros(std::move(shape));
    m.values = std::move(values);
    return m;
}

IntMask rand_mask(Shape shape, int classes, std::uint64_t seed) {
    IntMask m = IntMask::zeros(std::move(shape));
    for (std::size_t i = 0; i < m.values.size(); ++i)
        m.values[i] = static_cast<std::uint8_t>(oracle::mix64(seed + i) % static_cast<std::uint64_t>(classes));
    return m;
}

}  // namespace

TEST_CASE("identical masks score 1 everywhere") {
    IntMask m = rand_mask({2, 8, 8}, 4, 1);
    ConfusionAccumulator acc = evaluate_masks(m, m, 4);
    for (int c = 0; c < 4; ++c) {
        ClassMetrics cm = acc.cls(c);
        CHECK(cm.iou == 1.0);
        CHECK(cm.dice == 1.0);
        CHECK(cm.accuracy == 1.0);
        CHECK(cm.precision == 1.0);
        CHECK(cm.recall == 1.0);
    }
    CHECK(acc.macro(true).iou == 1.0);
    CHECK(acc.macro(false).dice == 1.0);
}

TEST_CASE("disjoint masks score 0") {
    IntMask pred = mask_of({1, 2, 2}, {1, 1, 1, 1});
    IntMask truth = mask_of({1, 2, 2}, {2, 2, 2, 2});
    ConfusionAccumulator acc = evaluate_masks(pred, truth, 3);
    for (int c : {1, 2}) {
        CHECK(acc.cls(c).iou == 0.0);
        CHECK(acc.cls(c).dice == 0.0);
    }
    CHECK(!acc.present(0));
}

TEST_CASE("100/100 pixel masks overlapping on 50 give dice 0.5, iou 1/3") {
    IntMask pred = IntMask::zeros({1, 10, 20});
    IntMask truth = IntMask::zeros({1, 10, 20});
    for (int i = 0; i < 100; ++i) pred.values[i] = 1;
    for (int i = 50; i < 150; ++i) truth.values[i] = 1;
    ConfusionAccumulator acc = evaluate_masks(pred, truth, 2);
    CHECK(acc.cls(1).dice == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(acc.cls(1).iou == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(acc.cls(1).precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(acc.cls(1).recall == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("dice and iou satisfy dice = 2*iou/(1+iou) on random mask pairs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ConfusionAccumulator acc =
            evaluate_masks(rand_mask({1, 9, 9}, 4, 100 + seed), rand_mask({1, 9, 9}, 4, 200 + seed), 4);
        for (int c = 0; c < 4; ++c) {
            if (!acc.present(c)) continue;
            ClassMetrics cm = acc.cls(c);
            CHECK(cm.dice == doctest::Approx(2.0 * cm.iou / (1.0 + cm.iou)).epsilon(1e-12));
        }
    }
}

TEST_CASE("relabeling both masks with the same permutation permutes the per-class rows") {
    IntMask pred = rand_mask({1, 8, 8}, 3, 7);
    IntMask truth = rand_mask({1, 8, 8}, 3, 8);
    const int perm[3] = {2, 0, 1};
    IntMask pred2 = pred, truth2 = truth;
    for (auto& v : pred2.values) v = static_cast<std::uint8_t>(perm[v]);
    for (auto& v : truth2.values) v = static_cast<std::uint8_t>(perm[v]);
    ConfusionAccumulator a = evaluate_masks(pred, truth, 3);
    ConfusionAccumulator b = evaluate_masks(pred2, truth2, 3);
    for (int c = 0; c < 3; ++c) {
        CHECK(a.cls(c).iou == b.cls(perm[c]).iou);
        CHECK(a.cls(c).dice == b.cls(perm[c]).dice);
        CHECK(a.cls(c).recall == b.cls(perm[c]).recall);
    }
    CHECK(a.macro(true).iou == doctest::Approx(b.macro(true).iou).epsilon(1e-12));
}

TEST_CASE("merging accumulators equals accumulating everything at once") {
    IntMask p1 = rand_mask({1, 6, 6}, 4, 30), t1 = rand_mask({1, 6, 6}, 4, 31);
    IntMask p2 = rand_mask({2, 5, 5}, 4, 32), t2 = rand_mask({2, 5, 5}, 4, 33);
    ConfusionAccumulator whole(4);
    whole.add(p1, t1);
    whole.add(p2, t2);
    ConfusionAccumulator left(4), right(4);
    left.add(p1, t1);
    right.add(p2, t2);
    left.merge(right);
    for (int c = 0; c < 4; ++c) {
        CHECK(left.tp(c) == whole.tp(c));
        CHECK(left.fp(c) == whole.fp(c));
        CHECK(left.fn(c) == whole.fn(c));
    }
    CHECK(left.macro(true).dice == whole.macro(true).dice);
}

TEST_CASE("classes absent from both masks are excluded from the macro average") {
    IntMask pred = mask_of({1, 2, 2}, {0, 0, 1, 1});
    IntMask truth = mask_of({1, 2, 2}, {0, 1, 1, 0});
    ConfusionAccumulator acc = evaluate_masks(pred, truth, 4);  // classes 2,3 never appear
    // class0: tp=1 fp=1 fn=1; class1 symmetric -> iou 1/3 each
    CHECK(acc.macro(true).iou == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(acc.macro(false).iou == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(!acc.present(2));
    CHECK(!acc.present(3));
}

TEST_CASE("shape mismatch and out-of-range ids are rejected") {
    ConfusionAccumulator acc(3);
    CHECK_THROWS_AS(acc.add(IntMask::zeros({1, 2, 2}), IntMask::zeros({1, 2, 3})), Error);
    IntMask bad = IntMask::zeros({1, 1, 1});
    bad.values[0] = 3;
    CHECK_THROWS_AS(acc.add(bad, IntMask::zeros({1, 1, 1})), Error);
    ConfusionAccumulator other(4);
    CHECK_THROWS_AS(acc.merge(other), Error);
}

TEST_CASE("report emits one fixed-point line per metric and class") {
    IntMask m = rand_mask({1, 4, 4}, 2, 40);
    ConfusionAccumulator acc = evaluate_masks(m, m, 2);
    std::string text = acc.report();
    CHECK(text.find("dice.class0 = 1.000000000\n") != std::string::npos);
    CHECK(text.find("iou.class1 = 1.000000000\n") != std::string::npos);
    CHECK(text.find("present.class0 = 1\n") != std::string::npos);
    CHECK(text.find("dice.macro = 1.000000000\n") != std::string::npos);
    CHECK(text.find("iou.macro_foreground = 1.000000000\n") != std::string::npos);
}
