#ifndef HOLOGEN_RNG_HPP
#define HOLOGEN_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace hologen {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; good avalanche, used to derive stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Splittable seed tree. Every consumer of randomness gets its own stream
/// derived from (seed, replicate, purpose tag, generation ...), so adding
/// draws in one place never shifts the draws seen elsewhere.
class StreamSeeder {
public:
    explicit StreamSeeder(std::uint64_t seed) : state_(mix64(seed)) {}

    StreamSeeder child(std::uint64_t index) const {
        return StreamSeeder(FromState{}, mix64(state_ ^ mix64(index ^ 0x517cc1b727220a95ULL)));
    }

    StreamSeeder child(std::string_view tag) const { return child(fnv1a64(tag)); }

    std::uint64_t state() const { return state_; }

    Rng stream() const { return Rng(state_); }

private:
    struct FromState {};
    StreamSeeder(FromState, std::uint64_t raw) : state_(raw) {}
    std::uint64_t state_;
};

} // namespace hologen

#endif
