#pragma once

// Independent reference implementations the test suite trusts: a central
// finite-difference gradient checker and a tiny hash RNG for reproducible
// test inputs. Deliberately written without reusing library internals.

#include <cstdint>
#include <functional>
#include <vector>

#include "cystonet/tensor.hpp"
#include "cystonet/transformer.hpp"

namespace oracle {

// SplitMix64. Distinct from the library's RNG so test data does not
// depend on the code under test.
std::uint64_t mix64(std::uint64_t x);
double unit_double(std::uint64_t x);  // in [0,1)

std::vector<double> random_uniform(std::size_t n, double lo, double hi, std::uint64_t seed);

struct FdResult {
    double max_rel = 0.0;
    double max_abs = 0.0;
    long checked = 0;
};

// Central finite differences, step `eps`, on the scalar output of `fn`.
// Checks every coordinate of every input when coords_per_input < 0,
// otherwise a seeded sample of that many coordinates per input.
// rel = |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
FdResult fd_check(const std::function<cysto::Tensor(const std::vector<cysto::Tensor>&)>& fn,
                  std::vector<cysto::Tensor> inputs, double eps = 1e-5, long coords_per_input = -1,
                  std::uint64_t seed = 1);

struct LoopAttention {
    std::vector<double> output;   // n * l * c
    std::vector<double> weights;  // n * l * l, rows sum to 1
};

// Nested-loop non-local attention over l token positions. Projection
// matrices are [c,c] row-major (input index major) with [c] biases;
// null pointers mean identity / no bias.
LoopAttention nonlocal_attention_loop(const std::vector<double>& x, int n, int l, int c, const double* wq,
                                      const double* bq, const double* wk, const double* bk, const double* wv,
                                      const double* bv);

// Per-head nested-loop multi-head attention reading the same weights as the
// implementation but computing with plain loops. Returns n * l * embed_dim.
std::vector<double> mhsa_loop(const std::vector<double>& x, int n, int l, const cysto::TransformerBlockParams& p);

}  // namespace oracle
