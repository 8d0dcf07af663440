#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace heatlab {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based seed split: folds each tag into the master seed with
/// mix64, so stream(seed, {k, r}) never depends on how many other streams
/// were drawn before it.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) noexcept;

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}
    RngStream(std::uint64_t master, std::initializer_list<std::uint64_t> tags)
        : engine_(derive_seed(master, tags)) {}

    double normal(double stddev = 1.0) { return stddev * unit_normal_(engine_); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> unit_normal_{0.0, 1.0};
};

}  // namespace heatlab
