#pragma once

#include <cstdint>
#include <vector>

namespace evotext {

// Portable seeded generator: xoshiro256** seeded through splitmix64.
// The algorithm is fixed so that a given seed reproduces the same stream
// on every platform; std::mt19937 distributions are deliberately avoided.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform double in [0, 1) with 53 bits of precision.
    double uniform();

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    // Uniform integer in [0, n). n must be > 0. Rejection sampled, unbiased.
    std::uint64_t uniform_index(std::uint64_t n);

    // Derive an independent stream for a named sub-task.
    Rng derive(std::uint64_t stream) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

// FNV-1a over raw bytes; used for parameter freeze checks and checkpoints.
std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t h = 1469598103934665603ULL);

}  // namespace evotext
