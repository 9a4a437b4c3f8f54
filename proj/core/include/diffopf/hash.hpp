#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace diffopf {

/// FNV-1a 64-bit over a byte range.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xCBF29CE484222325ull);

/// FNV-1a 64-bit of a whole file's contents.
std::uint64_t hash_file(const std::string& path);

std::string to_hex(std::uint64_t h);

}  // namespace diffopf
