#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace bdf {

/// CRC32 (IEEE) of a byte range.
std::uint32_t crc32_bytes(const void* data, std::size_t len);

/// CRC32 of a whole file's contents.
std::uint32_t crc32_file(const std::filesystem::path& path);

}  // namespace bdf
