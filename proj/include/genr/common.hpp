#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace genr {

using Token = uint32_t;
using ItemId = int64_t;

// Raised for operator mistakes: bad flags, unreadable config. Exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised for malformed or inconsistent input data and missing/stale
// artifacts. Exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when an internal invariant is violated; always a bug. Exit code 3.
struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// splitmix64: single-stream 64-bit generator. Constants from the reference
// implementation by Sebastiano Vigna (public domain).
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible at the corpus
    // sizes this project targets.
    uint64_t below(uint64_t n) { return next() % n; }

  private:
    uint64_t state_;
};

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// Little-endian binary IO helpers for the snapshot formats.
void put_u32(std::string& out, uint32_t v);
void put_u64(std::string& out, uint64_t v);
void put_i64(std::string& out, int64_t v);
void put_f64(std::string& out, double v);

class ByteReader {
  public:
    explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

    uint32_t u32();
    uint64_t u64();
    int64_t i64();
    double f64();
    void raw(void* dst, size_t len);
    size_t pos() const { return pos_; }
    size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& bytes() const { return bytes_; }

  private:
    std::string bytes_;
    size_t pos_ = 0;
};

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::string& bytes);

}  // namespace genr
