#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace deskmt {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of a byte buffer.
Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256(std::string_view text);

/// Lowercase hex rendering.
std::string to_hex(std::span<const std::uint8_t> bytes);

inline std::string sha256_hex(std::string_view text) { return to_hex(sha256(text)); }

}  // namespace deskmt
