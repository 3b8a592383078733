#pragma once

#include <cstdint>
#include <initializer_list>

namespace g2lstm {

/// Splittable counter-based generator (SplitMix64 family). The state is an
/// explicit value: identical seed + identical call sequence reproduces the
/// stream bit-exactly, and derive() yields independent child streams without
/// advancing the parent, so per-(layer, timestep, gate) streams are
/// well-defined regardless of evaluation order.
class RngState {
public:
    explicit RngState(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform draw strictly inside (0,1): (u64 >> 11 + 0.5) * 2^-53.
    double uniform();

    /// log U - log(1-U) for one uniform draw; standard logistic.
    double logistic();

    /// Child stream; advances this generator twice.
    RngState split();

    /// Independent stream keyed by a path of indices; does not advance *this.
    RngState derive(std::initializer_list<std::uint64_t> path) const;

    bool operator==(const RngState&) const = default;

private:
    RngState(std::uint64_t state, std::uint64_t gamma) : state_(state), gamma_(gamma) {}

    std::uint64_t state_;
    std::uint64_t gamma_;
};

}  // namespace g2lstm
