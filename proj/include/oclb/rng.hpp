#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace oclb {

/// Counter-based SplitMix64 stream keyed by (seed, label).
///
/// Draw i of a stream is a pure function of (seed, label, i), so identical
/// pairs reproduce identical sequences on every platform. Streams with
/// different labels are keyed independently; use `substream` to hand a child
/// stream to another owner instead of sharing one stream across threads.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label);

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01();

    /// Uniform in [lo, hi); returns lo when lo == hi. Throws ContractError if lo > hi.
    double uniform(double lo, double hi);

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal draw (Box-Muller, consumes two uniforms).
    double normal();

    /// Bernoulli(p).
    bool chance(double p) { return uniform01() < p; }

    /// Independent child stream labelled "<label>/<child>".
    RngStream substream(std::string_view child) const;

    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& label() const noexcept { return label_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::string label_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// SplitMix64 output function.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `text`.
std::uint64_t hash_label(std::string_view text) noexcept;

}  // namespace oclb
