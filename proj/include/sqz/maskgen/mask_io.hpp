#pragma once

#include <filesystem>
#include <string_view>

#include "sqz/maskgen/mask.hpp"

namespace sqz::maskgen {

enum class MaskFormat { pgm16, csv };

MaskFormat parse_mask_format(std::string_view s);

/// Binary PGM (P5). maxval = 2^k - 1; samples are big-endian 16-bit when
/// maxval > 255, single bytes otherwise. CSV is headerless, row-major.
/// A non-empty one-line `comment` goes into the PGM header; CSV drops it.
void export_mask(const PhaseMask& mask, MaskFormat format, const std::filesystem::path& path,
                 std::string_view comment = {});

/// PGM: bit depth inferred from maxval. CSV: `bit_depth` supplies k.
/// Pixel pitch is not stored in either format; `pitch` fills it in.
PhaseMask import_mask(const std::filesystem::path& path, MaskFormat format, int bit_depth = 10,
                      double pitch = 8e-6);

}  // namespace sqz::maskgen
