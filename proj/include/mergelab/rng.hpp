#pragma once

#include <cmath>
#include <cstdint>

namespace mergelab {

// Counter-based splittable RNG. Every draw is a pure function of
// (key, counter), so substreams can be derived in any order and
// per-sample streams stay independent of generation order.
namespace rng {

inline uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t key, uint64_t word) {
    return mix64(key ^ (word + 0x9e3779b97f4a7c15ULL + (key << 6) + (key >> 2)));
}

} // namespace rng

// A stream is just a key; draws index it by counter.
class RngStream {
public:
    explicit RngStream(uint64_t key) : key_(key) {}

    // Derived substream, independent of this stream's counters.
    RngStream substream(uint64_t index) const {
        return RngStream(rng::hash_combine(rng::mix64(key_), index));
    }

    uint64_t bits(uint64_t counter) const { return rng::hash_combine(key_, counter); }

    // Uniform in [0, 1).
    double uniform(uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), n >= 1.
    uint64_t below(uint64_t counter, uint64_t n) const {
        return static_cast<uint64_t>(uniform(counter) * static_cast<double>(n)) % n;
    }

    // Standard normal via Box-Muller on two counters (2*counter, 2*counter+1).
    double gaussian(uint64_t counter) const {
        double u1 = uniform(2 * counter);
        double u2 = uniform(2 * counter + 1);
        if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    uint64_t key() const { return key_; }

private:
    uint64_t key_;
};

} // namespace mergelab
