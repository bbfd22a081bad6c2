#include "oclb/rng.hpp"

#include <cmath>
#include <numbers>

#include "oclb/errors.hpp"

namespace oclb {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view label)
    : seed_(seed), label_(label), key_(mix64(seed ^ mix64(hash_label(label)))) {}

std::uint64_t RngStream::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    if (!(lo <= hi)) {
        throw ContractError("uniform: lo > hi");
    }
    if (lo == hi) {
        return lo;
    }
    const double v = lo + (hi - lo) * uniform01();
    // lo + (hi - lo) * u can round up to hi for u close to 1.
    return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) {
        throw ContractError("below: empty range");
    }
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
        const std::uint64_t v = next_u64();
        if (v < limit) {
            return v % n;
        }
    }
}

double RngStream::normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::substream(std::string_view child) const {
    std::string lbl = label_;
    lbl += '/';
    lbl += child;
    return RngStream(seed_, lbl);
}

}  // namespace oclb
