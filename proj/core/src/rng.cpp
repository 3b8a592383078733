#include "g2lstm/rng.hpp"

#include <bit>
#include <cmath>

namespace g2lstm {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t mix_gamma(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    z |= 1ULL;
    if (std::popcount(z ^ (z >> 1)) < 24) z ^= 0xaaaaaaaaaaaaaaaaULL;
    return z;
}

}  // namespace

RngState::RngState(std::uint64_t seed) : state_(seed), gamma_(kGoldenGamma) {}

std::uint64_t RngState::next_u64() {
    state_ += gamma_;
    return mix64(state_);
}

double RngState::uniform() {
    // 53 random bits offset by half a ulp: min 2^-54, max 1 - 2^-54.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngState::logistic() {
    const double u = uniform();
    return std::log(u) - std::log1p(-u);
}

RngState RngState::split() {
    const std::uint64_t s = next_u64();
    const std::uint64_t g = next_u64();
    return RngState(s, mix_gamma(g));
}

RngState RngState::derive(std::initializer_list<std::uint64_t> path) const {
    std::uint64_t h = mix64(state_ ^ (gamma_ * 0x2545f4914f6cdd1dULL));
    for (std::uint64_t x : path) h = mix64((h + kGoldenGamma) ^ mix64(x + kGoldenGamma));
    return RngState(h, kGoldenGamma);
}

}  // namespace g2lstm
