#ifndef MALFOX_BYTES_HPP
#define MALFOX_BYTES_HPP

#include <malfox/error.hpp>

#include <openssl/evp.h>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

namespace malfox {

using byte_vector = std::vector<std::uint8_t>;
using byte_span = std::span<const std::uint8_t>;

// Little-endian accessors. Callers bounds-check before reading.
inline std::uint16_t load_le16(byte_span b, std::size_t off)
{
    return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

inline std::uint32_t load_le32(byte_span b, std::size_t off)
{
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

inline std::uint64_t load_le64(byte_span b, std::size_t off)
{
    return static_cast<std::uint64_t>(load_le32(b, off)) |
           (static_cast<std::uint64_t>(load_le32(b, off + 4)) << 32);
}

inline void store_le16(std::span<std::uint8_t> b, std::size_t off, std::uint16_t v)
{
    b[off] = static_cast<std::uint8_t>(v);
    b[off + 1] = static_cast<std::uint8_t>(v >> 8);
}

inline void store_le32(std::span<std::uint8_t> b, std::size_t off, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        b[off + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline void store_le64(std::span<std::uint8_t> b, std::size_t off, std::uint64_t v)
{
    store_le32(b, off, static_cast<std::uint32_t>(v));
    store_le32(b, off + 4, static_cast<std::uint32_t>(v >> 32));
}

inline void append_le16(byte_vector& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void append_le32(byte_vector& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void append_le64(byte_vector& out, std::uint64_t v)
{
    append_le32(out, static_cast<std::uint32_t>(v));
    append_le32(out, static_cast<std::uint32_t>(v >> 32));
}

constexpr bool is_power_of_two(std::uint64_t v) noexcept { return v != 0 && (v & (v - 1)) == 0; }

constexpr std::uint64_t align_up(std::uint64_t v, std::uint64_t alignment) noexcept
{
    return alignment == 0 ? v : (v + alignment - 1) / alignment * alignment;
}

inline byte_vector read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw error(errc::io_error, "cannot open " + path.string());
    return byte_vector(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, byte_span data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw error(errc::io_error, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw error(errc::io_error, "short write to " + path.string());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    write_file(path, byte_span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text_file(const std::filesystem::path& path)
{
    auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

/// Lowercase hex SHA-256 of the input.
inline std::string sha256_hex(byte_span data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw error(errc::io_error, "sha256 failed");
    static constexpr char digits[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(digits[digest[i] >> 4]);
        hex.push_back(digits[digest[i] & 0xF]);
    }
    return hex;
}

inline std::string sha256_hex(const std::string& text)
{
    return sha256_hex(byte_span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace malfox

#endif // MALFOX_BYTES_HPP
