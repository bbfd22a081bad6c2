#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "oclb/tensor.hpp"

namespace oclb {

/// A decoded OCLT record: rank 1 is a Vector, rank 3 a FeatureMap.
using Tensor = std::variant<Vector, FeatureMap>;

/// OCLT record layout (all integers little-endian):
///
///   0..3    magic "OCLT"
///   4       version (1)
///   5       rank (1 or 3)
///   6..     rank x u32 dims
///   ...     prod(dims) x IEEE-754 binary32 payload
///   last 8  u64 XXH64 (seed 0) of every preceding byte
inline constexpr std::uint8_t kOcltVersion = 1;

std::vector<std::uint8_t> write_tensor_record(const Tensor& tensor);
Tensor read_tensor_record(std::span<const std::uint8_t> bytes);

void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor_file(const std::filesystem::path& path);

/// XXH64 with the given seed.
std::uint64_t xxh64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0);

}  // namespace oclb
