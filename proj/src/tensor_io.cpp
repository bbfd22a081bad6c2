#include "oclb/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "oclb/errors.hpp"

namespace oclb {

namespace {

constexpr std::uint64_t kP1 = 11400714785074694791ULL;
constexpr std::uint64_t kP2 = 14029467366897019727ULL;
constexpr std::uint64_t kP3 = 1609587929392839161ULL;
constexpr std::uint64_t kP4 = 9650029242287828579ULL;
constexpr std::uint64_t kP5 = 2870177450012600261ULL;

std::uint64_t load64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

std::uint32_t load32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t round64(std::uint64_t acc, std::uint64_t lane) {
    acc += lane * kP2;
    acc = std::rotl(acc, 31);
    return acc * kP1;
}

std::uint64_t merge64(std::uint64_t acc, std::uint64_t val) {
    acc ^= round64(0, val);
    return acc * kP1 + kP4;
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

}  // namespace

std::uint64_t xxh64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
    const std::uint8_t* p = bytes.data();
    const std::uint8_t* const end = p + bytes.size();
    std::uint64_t h;

    if (bytes.size() >= 32) {
        std::uint64_t v1 = seed + kP1 + kP2;
        std::uint64_t v2 = seed + kP2;
        std::uint64_t v3 = seed;
        std::uint64_t v4 = seed - kP1;
        const std::uint8_t* const limit = end - 32;
        do {
            v1 = round64(v1, load64(p));
            v2 = round64(v2, load64(p + 8));
            v3 = round64(v3, load64(p + 16));
            v4 = round64(v4, load64(p + 24));
            p += 32;
        } while (p <= limit);
        h = std::rotl(v1, 1) + std::rotl(v2, 7) + std::rotl(v3, 12) + std::rotl(v4, 18);
        h = merge64(h, v1);
        h = merge64(h, v2);
        h = merge64(h, v3);
        h = merge64(h, v4);
    } else {
        h = seed + kP5;
    }
    h += static_cast<std::uint64_t>(bytes.size());

    while (p + 8 <= end) {
        h ^= round64(0, load64(p));
        h = std::rotl(h, 27) * kP1 + kP4;
        p += 8;
    }
    if (p + 4 <= end) {
        h ^= static_cast<std::uint64_t>(load32(p)) * kP1;
        h = std::rotl(h, 23) * kP2 + kP3;
        p += 4;
    }
    while (p < end) {
        h ^= static_cast<std::uint64_t>(*p) * kP5;
        h = std::rotl(h, 11) * kP1;
        ++p;
    }
    h ^= h >> 33;
    h *= kP2;
    h ^= h >> 29;
    h *= kP3;
    h ^= h >> 32;
    return h;
}

std::vector<std::uint8_t> write_tensor_record(const Tensor& tensor) {
    std::vector<std::uint32_t> dims;
    std::span<const float> payload;
    if (const auto* v = std::get_if<Vector>(&tensor)) {
        dims = {static_cast<std::uint32_t>(v->dim())};
        payload = v->data();
    } else {
        const auto& g = std::get<FeatureMap>(tensor);
        dims = {static_cast<std::uint32_t>(g.height()), static_cast<std::uint32_t>(g.width()),
                static_cast<std::uint32_t>(g.channels())};
        payload = g.data();
    }

    std::vector<std::uint8_t> out;
    out.reserve(6 + 4 * dims.size() + 4 * payload.size() + 8);
    out.insert(out.end(), {'O', 'C', 'L', 'T', kOcltVersion, static_cast<std::uint8_t>(dims.size())});
    for (auto d : dims) {
        put32(out, d);
    }
    for (std::size_t i = 0; i < payload.size(); ++i) {
        if (!std::isfinite(payload[i])) {
            throw DataError("write_tensor_record: non-finite value at index " + std::to_string(i));
        }
        put32(out, std::bit_cast<std::uint32_t>(payload[i]));
    }
    put64(out, xxh64(out));
    return out;
}

Tensor read_tensor_record(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), "OCLT", 4) != 0) {
        throw FormatError("tensor record: bad magic");
    }
    if (bytes[4] != kOcltVersion) {
        throw FormatError("tensor record: unsupported version " + std::to_string(bytes[4]));
    }
    const std::size_t rank = bytes[5];
    if (rank != 1 && rank != 3) {
        throw FormatError("tensor record: unsupported rank " + std::to_string(rank));
    }
    const std::size_t header = 6 + 4 * rank;
    if (bytes.size() < header) {
        throw TruncationError("tensor record: header truncated");
    }
    std::vector<std::size_t> dims(rank);
    std::size_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        dims[i] = load32(bytes.data() + 6 + 4 * i);
        if (dims[i] == 0) {
            throw FormatError("tensor record: zero dimension");
        }
        count *= dims[i];
    }
    const std::size_t expected = header + 4 * count + 8;
    if (bytes.size() < expected) {
        throw TruncationError("tensor record: expected " + std::to_string(expected) + " bytes, got " +
                              std::to_string(bytes.size()));
    }
    if (bytes.size() > expected) {
        throw FormatError("tensor record: trailing bytes after checksum");
    }
    const std::uint64_t stored = load64(bytes.data() + expected - 8);
    if (stored != xxh64(bytes.first(expected - 8))) {
        throw FormatError("tensor record: checksum mismatch");
    }

    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = std::bit_cast<float>(load32(bytes.data() + header + 4 * i));
        if (!std::isfinite(data[i])) {
            throw DataError("tensor record: non-finite payload at index " + std::to_string(i));
        }
    }
    if (rank == 1) {
        return Vector(std::move(data));
    }
    return FeatureMap(dims[0], dims[1], dims[2], std::move(data));
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor) {
    const auto bytes = write_tensor_record(tensor);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("write failed: " + path.string());
    }
}

Tensor read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_tensor_record(bytes);
}

}  // namespace oclb
