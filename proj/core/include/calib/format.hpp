#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace calib {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_roundtrip(double value);

/// Human-facing number: 6 significant digits, locale independent.
std::string format_sig6(double value);

/// Fixed-point with `decimals` digits; used for SVG coordinates.
std::string format_fixed(double value, int decimals);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

}  // namespace calib
