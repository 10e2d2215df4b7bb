#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace d2d {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Lowercase hex, no separators.
std::string to_hex(ByteView data);

/// Strict inverse of to_hex; throws std::invalid_argument on odd length or
/// non-hex characters.
Bytes from_hex(const std::string& hex);

inline Bytes concat(ByteView a, ByteView b) {
    Bytes out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace d2d
