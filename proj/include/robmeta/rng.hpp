#pragma once

#include <cstdint>

namespace robmeta {

/// SplitMix64 finaliser. Used to expand seeds and to derive stream keys.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Key of substream `index` under `parent`:
///   mix(mix(parent) ^ (index + 1) * 0x9E3779B97F4A7C15)
/// where mix is one SplitMix64 step. Per-quality-vector streams use
/// derive_stream(master, q_index); per-chain streams use
/// derive_stream(q_stream, chain).
std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t index) noexcept;

/// xoshiro256++ with a few distribution helpers. The state is seeded by four
/// SplitMix64 outputs, so any 64-bit seed (including 0) is valid.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    std::uint64_t next() noexcept;

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;

    /// Standard normal, Marsaglia polar method with a cached spare.
    double normal() noexcept;

    /// Gamma(shape, 1). Marsaglia-Tsang; shape < 1 uses the u^(1/shape) boost.
    double gamma(double shape) noexcept;

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace robmeta
