#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sqz {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// 16-hex-digit rendering of fnv1a64; used as the config hash in artifacts.
std::string hash_hex(std::string_view bytes);

}  // namespace sqz
