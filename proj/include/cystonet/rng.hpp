#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cysto::rng {

/// Key for a named random stream. Every draw in the library comes from a
/// stream keyed by (seed, purpose, a, b), so results never depend on call
/// order across unrelated subsystems and no RNG state needs checkpointing.
std::uint64_t key(std::uint64_t seed, std::string_view purpose, std::uint64_t a = 0, std::uint64_t b = 0);

/// SplitMix64 sequence starting at a key.
class Stream {
public:
    explicit Stream(std::uint64_t k) : state_(k) {}

    std::uint64_t next_u64();
    double uniform();                      // [0,1)
    double uniform(double lo, double hi);  // [lo,hi)
    double normal();                       // standard normal, Box-Muller
    int below(int n);                      // uniform in [0,n)

private:
    std::uint64_t state_;
};

void fill_normal(std::vector<double>& v, Stream& s, double stddev);

/// In-place Fisher-Yates, descending index, swap target drawn from [0, i].
template <class T>
void shuffle(std::vector<T>& v, Stream& s) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
        int j = s.below(i + 1);
        std::swap(v[i], v[static_cast<std::size_t>(j)]);
    }
}

}  // namespace cysto::rng
