#pragma once

#include <cstdint>

namespace rdis {

/// Deterministic xoshiro256** stream seeded through splitmix64. Draws depend
/// only on the seed and call sequence, not on the standard library, so runs
/// reproduce across platforms.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0);

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random mantissa bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();

    /// Independent child stream; advances this stream by one draw.
    RngStream split();

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
};

}  // namespace rdis
