#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace contfood::codec {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws DataError on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Doubles as little-endian IEEE-754 binary64, base64-encoded.
std::string encode_f64(std::span<const double> values);
std::vector<double> decode_f64(std::string_view text);

std::uint32_t crc32(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);
/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

/// ISO-8601 UTC timestamp. Honors SOURCE_DATE_EPOCH when set so artifacts
/// can be reproduced byte-for-byte.
std::string utc_timestamp();

}  // namespace contfood::codec
