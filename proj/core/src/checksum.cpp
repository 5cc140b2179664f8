#include "bdf/checksum.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>
#include <string>

#include "bdf/errors.hpp"

namespace bdf {

std::uint32_t crc32_bytes(const void* data, std::size_t len) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

std::uint32_t crc32_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw FormatError("crc32: cannot open " + path.string());
    }
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return crc32_bytes(buf.data(), buf.size());
}

}  // namespace bdf
