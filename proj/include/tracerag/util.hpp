#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracerag::util {

// FNV-1a, 64-bit. Used for token bucketing and store checksums.
inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

// Streaming SHA-256. Self-contained; used for cache keys, unit ids and
// tree digests.
class Sha256 {
public:
    Sha256();
    void update(std::string_view data);
    // Finalizes and returns lowercase hex. The object must not be reused.
    std::string hex_digest();

private:
    void process_block(const unsigned char* block);

    std::uint32_t state_[8];
    std::uint64_t total_len_ = 0;
    unsigned char buffer_[64];
    std::size_t buffer_len_ = 0;
};

std::string sha256_hex(std::string_view data);

std::string to_hex(std::uint64_t v);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view content);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// Splits on runs of non-alphanumeric bytes after lowercasing.
std::vector<std::string> tokenize_alnum(std::string_view text);

// Round to 4 decimal places with ties-to-even semantics.
double round4(double v);

} // namespace tracerag::util
