#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace talus {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

Bytes to_bytes(std::string_view s);

std::string hex_encode(ByteView data);

// Throws TalusError{CORRUPT_STATE} on odd length or non-hex characters.
Bytes hex_decode(std::string_view hex);

// True iff needle occurs as a contiguous byte substring of haystack.
bool contains_subsequence(ByteView haystack, ByteView needle);

inline void append(Bytes& out, ByteView data) {
    out.insert(out.end(), data.begin(), data.end());
}

}  // namespace talus
