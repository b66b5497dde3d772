#include "cystonet/rng.hpp"

#include <cmath>

namespace cysto::rng {

namespace {
std::uint64_t splitmix(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace

std::uint64_t key(std::uint64_t seed, std::string_view purpose, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the purpose tag
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = seed;
    h ^= splitmix(s);
    s = h + a;
    h ^= splitmix(s);
    s = h + b;
    h ^= splitmix(s);
    return h;
}

std::uint64_t Stream::next_u64() { return splitmix(state_); }

double Stream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Stream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Stream::normal() {
    // u1 in (0,1] so the log is finite.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
}

int Stream::below(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned>(n)) >> 64);
}

void fill_normal(std::vector<double>& v, Stream& s, double stddev) {
    for (double& x : v) x = stddev * s.normal();
}

}  // namespace cysto::rng
