#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace lprisma {

// SHA-256 of the given bytes, lowercase hex (64 chars).
std::string sha256_hex(std::string_view data);

// First 16 bytes of SHA-256, lowercase hex (32 chars). Used for record ids.
std::string sha256_hex16(std::string_view data);

// SHA-256 of a file's contents. Throws lprisma::Error if the file cannot be read.
std::string sha256_file_hex(const std::string& path);

// Seeded 64-bit string hash (FNV-1a folded through a splitmix64 finalizer).
// Stable across platforms; used by the builtin feature-hash embedder.
std::uint64_t seeded_hash64(std::string_view token, std::uint64_t seed);

}  // namespace lprisma
