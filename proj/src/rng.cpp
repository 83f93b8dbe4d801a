#include "qwthn/rng.hpp"

#include "qwthn/errors.hpp"

namespace qwthn {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t RngState::next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * kGolden);
}

double RngState::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

std::uint64_t RngState::next_below(std::uint64_t bound) {
    if (bound == 0) {
        throw ParamError("next_below: bound must be positive");
    }
    // rejection sampling, no modulo bias
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t v = next_u64();
    while (v >= limit) {
        v = next_u64();
    }
    return v % bound;
}

RngState RngState::split(std::uint64_t stream) const {
    return RngState(mix64(seed_ ^ mix64(stream + kGolden)));
}

} // namespace qwthn
