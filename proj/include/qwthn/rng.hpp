#pragma once

#include <cstdint>

namespace qwthn {

// Counter-based deterministic generator (splitmix64 output function).
// Draw n is a pure function of (seed, n), so streams replay identically on
// any platform. Single-owner: do not share one instance across threads.
class RngState {
public:
    explicit RngState(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t next_u64();
    double next_double(); // uniform on [0, 1)
    double uniform(double lo, double hi);
    std::uint64_t next_below(std::uint64_t bound); // uniform on [0, bound)

    // Derives an independent stream; deterministic in (seed, stream).
    RngState split(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace qwthn
