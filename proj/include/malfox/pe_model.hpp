#ifndef MALFOX_PE_MODEL_HPP
#define MALFOX_PE_MODEL_HPP

// In-memory model of a PE file and its byte-exact codec.
//
// A parsed image is a lossless decomposition of the input file:
//
//   [0, 64)                DOS header
//   [64, e_lfanew)         DOS stub (any length)
//   e_lfanew               "PE\0\0", COFF file header, optional header
//   ...                    section table
//   [table end, first raw) header padding (free header space lives here)
//   per section            gap bytes, then exactly size_of_raw_data bytes
//   [last raw end, EOF)    overlay
//
// serialize_pe() concatenates those pieces back, so serialize(parse(b)) == b
// for every accepted input.

#include <malfox/bytes.hpp>
#include <malfox/error.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace malfox::pe {

inline constexpr std::size_t dos_header_size = 64;
inline constexpr std::size_t signature_size = 4;
inline constexpr std::size_t file_header_size = 20;
inline constexpr std::size_t section_header_size = 40;
inline constexpr std::size_t data_directory_count = 16;
inline constexpr std::size_t optional_header_size_pe32 = 224;
inline constexpr std::size_t optional_header_size_pe32plus = 240;
inline constexpr std::size_t max_sections = 96;
inline constexpr std::uint32_t min_file_alignment = 512;

inline constexpr std::uint16_t dos_magic = 0x5A4D; // "MZ"
inline constexpr std::uint32_t nt_signature = 0x00004550; // "PE\0\0"
inline constexpr std::uint16_t pe32_magic = 0x10B;
inline constexpr std::uint16_t pe32plus_magic = 0x20B;

namespace scn {
inline constexpr std::uint32_t cnt_code = 0x00000020;
inline constexpr std::uint32_t cnt_initialized_data = 0x00000040;
inline constexpr std::uint32_t mem_execute = 0x20000000;
inline constexpr std::uint32_t mem_read = 0x40000000;
inline constexpr std::uint32_t mem_write = 0x80000000;
} // namespace scn

enum class directory : std::size_t {
    export_table = 0,
    import_table = 1,
    resource = 2,
    exception = 3,
    security = 4,
    base_reloc = 5,
    debug = 6,
    architecture = 7,
    global_ptr = 8,
    tls = 9,
    load_config = 10,
    bound_import = 11,
    iat = 12,
    delay_import = 13,
    com_descriptor = 14,
    reserved = 15,
};

struct dos_header {
    std::uint16_t magic = dos_magic;
    std::array<std::uint8_t, 58> reserved{}; // bytes 2..59, kept verbatim
    std::uint32_t e_lfanew = 0;

    bool operator==(const dos_header&) const = default;
};

struct file_header {
    std::uint16_t machine = 0x14C;
    std::uint16_t number_of_sections = 0;
    std::uint32_t time_date_stamp = 0;
    std::uint32_t pointer_to_symbol_table = 0;
    std::uint32_t number_of_symbols = 0;
    std::uint16_t size_of_optional_header = optional_header_size_pe32;
    std::uint16_t characteristics = 0;

    bool operator==(const file_header&) const = default;
};

struct data_directory {
    std::uint32_t rva = 0;
    std::uint32_t size = 0;

    bool operator==(const data_directory&) const = default;
};

/// Decoded optional header. `raw` holds the whole on-disk header; the named
/// fields are authoritative and are written over `raw` on serialization.
struct optional_header {
    std::uint16_t magic = pe32_magic;
    std::uint32_t entry_point_rva = 0;
    std::uint64_t image_base = 0;
    std::uint32_t section_alignment = 0;
    std::uint32_t file_alignment = 0;
    std::uint32_t size_of_image = 0;
    std::uint32_t size_of_headers = 0;
    std::array<data_directory, data_directory_count> data_directories{};
    byte_vector raw;

    bool is_pe32() const noexcept { return magic == pe32_magic; }

    data_directory& dir(directory d) { return data_directories[static_cast<std::size_t>(d)]; }
    const data_directory& dir(directory d) const { return data_directories[static_cast<std::size_t>(d)]; }

    bool operator==(const optional_header&) const = default;
};

/// Field offsets inside the optional header that differ between PE32 and PE32+.
struct optional_layout {
    std::size_t image_base;
    std::size_t image_base_width;
    std::size_t rva_count;
    std::size_t directories;
    std::size_t standard_size;

    static optional_layout for_magic(std::uint16_t magic)
    {
        if (magic == pe32plus_magic)
            return {24, 8, 108, 112, optional_header_size_pe32plus};
        return {28, 4, 92, 96, optional_header_size_pe32};
    }
};

struct section_header {
    std::array<std::uint8_t, 8> name{};
    std::uint32_t virtual_size = 0;
    std::uint32_t virtual_address = 0;
    std::uint32_t size_of_raw_data = 0;
    std::uint32_t pointer_to_raw_data = 0;
    std::uint32_t pointer_to_relocations = 0;
    std::uint32_t pointer_to_linenumbers = 0;
    std::uint16_t number_of_relocations = 0;
    std::uint16_t number_of_linenumbers = 0;
    std::uint32_t characteristics = 0;

    std::string name_string() const
    {
        auto end = std::find(name.begin(), name.end(), std::uint8_t{0});
        return std::string(name.begin(), end);
    }

    bool is_executable() const noexcept { return (characteristics & (scn::mem_execute | scn::cnt_code)) != 0; }

    bool operator==(const section_header&) const = default;
};

inline std::array<std::uint8_t, 8> make_section_name(std::string_view text)
{
    std::array<std::uint8_t, 8> name{};
    for (std::size_t i = 0; i < name.size() && i < text.size(); ++i)
        name[i] = static_cast<std::uint8_t>(text[i]);
    return name;
}

struct section {
    section_header header;
    byte_vector data;       // exactly header.size_of_raw_data bytes
    byte_vector gap_before; // file bytes between the previous raw content and this section

    bool operator==(const section&) const = default;
};

struct pe_image {
    dos_header dos;
    byte_vector dos_stub;
    file_header file;
    optional_header optional;
    byte_vector header_padding;
    std::vector<section> sections;
    byte_vector overlay;

    bool is_pe32() const noexcept { return optional.is_pe32(); }

    std::size_t section_table_offset() const
    {
        return dos.e_lfanew + signature_size + file_header_size + file.size_of_optional_header;
    }

    std::size_t section_table_end() const { return section_table_offset() + sections.size() * section_header_size; }

    std::uint64_t file_size() const
    {
        std::uint64_t size = section_table_end() + header_padding.size() + overlay.size();
        for (const auto& s : sections)
            size += s.gap_before.size() + s.data.size();
        return size;
    }

    bool operator==(const pe_image&) const = default;
};

namespace detail {

inline void require(bool ok, errc code, const std::string& what, std::uint64_t offset)
{
    if (!ok)
        throw error(code, what, offset);
}

inline section_header decode_section_header(byte_span b, std::size_t off)
{
    section_header h;
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(off), 8, h.name.begin());
    h.virtual_size = load_le32(b, off + 8);
    h.virtual_address = load_le32(b, off + 12);
    h.size_of_raw_data = load_le32(b, off + 16);
    h.pointer_to_raw_data = load_le32(b, off + 20);
    h.pointer_to_relocations = load_le32(b, off + 24);
    h.pointer_to_linenumbers = load_le32(b, off + 28);
    h.number_of_relocations = load_le16(b, off + 32);
    h.number_of_linenumbers = load_le16(b, off + 34);
    h.characteristics = load_le32(b, off + 36);
    return h;
}

inline void encode_section_header(byte_vector& out, const section_header& h)
{
    out.insert(out.end(), h.name.begin(), h.name.end());
    append_le32(out, h.virtual_size);
    append_le32(out, h.virtual_address);
    append_le32(out, h.size_of_raw_data);
    append_le32(out, h.pointer_to_raw_data);
    append_le32(out, h.pointer_to_relocations);
    append_le32(out, h.pointer_to_linenumbers);
    append_le16(out, h.number_of_relocations);
    append_le16(out, h.number_of_linenumbers);
    append_le32(out, h.characteristics);
}

/// Header-level invariants shared by parse and serialize. `fail` decides the error code.
inline void check_optional_invariants(const optional_header& opt, errc code, std::uint64_t at)
{
    require(is_power_of_two(opt.file_alignment) && opt.file_alignment >= min_file_alignment, code,
            "file_alignment " + std::to_string(opt.file_alignment) + " is not a power of two >= 512", at + 36);
    require(opt.section_alignment >= opt.file_alignment, code, "section_alignment below file_alignment", at + 32);
    require(opt.size_of_image % opt.section_alignment == 0, code,
            "size_of_image is not a multiple of section_alignment", at + 56);
}

inline void check_section_invariants(const section_header& h, const optional_header& opt, errc code,
                                     std::uint64_t at)
{
    require(h.pointer_to_raw_data % opt.file_alignment == 0, code,
            "pointer_to_raw_data not aligned to file_alignment", at + 20);
    require(h.virtual_address % opt.section_alignment == 0, code,
            "virtual_address not aligned to section_alignment", at + 12);
}

} // namespace detail

/// Decode a PE file. Strict: malformed headers are rejected, never repaired.
inline pe_image parse_pe(byte_span bytes)
{
    using detail::require;
    const std::uint64_t len = bytes.size();
    require(len >= dos_header_size, errc::truncated, "input shorter than the 64-byte DOS header", len);

    pe_image img;
    img.dos.magic = load_le16(bytes, 0);
    require(img.dos.magic == dos_magic, errc::bad_magic, "missing MZ signature", 0);
    std::copy_n(bytes.begin() + 2, img.dos.reserved.size(), img.dos.reserved.begin());
    img.dos.e_lfanew = load_le32(bytes, 0x3C);

    const std::uint64_t nt = img.dos.e_lfanew;
    require(nt >= dos_header_size, errc::malformed_header, "e_lfanew points inside the DOS header", 0x3C);
    require(nt + signature_size + file_header_size <= len, errc::truncated, "NT headers extend past end of input",
            nt);
    img.dos_stub.assign(bytes.begin() + dos_header_size, bytes.begin() + static_cast<std::ptrdiff_t>(nt));
    require(load_le32(bytes, nt) == nt_signature, errc::bad_magic, "missing PE\\0\\0 signature", nt);

    const std::uint64_t fh = nt + signature_size;
    img.file.machine = load_le16(bytes, fh);
    img.file.number_of_sections = load_le16(bytes, fh + 2);
    img.file.time_date_stamp = load_le32(bytes, fh + 4);
    img.file.pointer_to_symbol_table = load_le32(bytes, fh + 8);
    img.file.number_of_symbols = load_le32(bytes, fh + 12);
    img.file.size_of_optional_header = load_le16(bytes, fh + 16);
    img.file.characteristics = load_le16(bytes, fh + 18);
    require(img.file.number_of_sections >= 1, errc::malformed_header, "number_of_sections is zero", fh + 2);
    require(img.file.number_of_sections <= max_sections, errc::malformed_header, "more than 96 sections", fh + 2);

    const std::uint64_t oh = fh + file_header_size;
    const std::uint64_t oh_size = img.file.size_of_optional_header;
    require(oh + 2 <= len, errc::truncated, "optional header extends past end of input", oh);
    auto& opt = img.optional;
    opt.magic = load_le16(bytes, oh);
    require(opt.magic == pe32_magic || opt.magic == pe32plus_magic, errc::malformed_header,
            "unknown optional header magic", oh);
    const auto layout = optional_layout::for_magic(opt.magic);
    require(oh_size >= layout.standard_size, errc::malformed_header,
            "size_of_optional_header too small for 16 data directories", fh + 16);
    require(oh + oh_size <= len, errc::truncated, "optional header extends past end of input", oh);
    opt.raw.assign(bytes.begin() + static_cast<std::ptrdiff_t>(oh),
                   bytes.begin() + static_cast<std::ptrdiff_t>(oh + oh_size));
    byte_span raw(opt.raw);
    opt.entry_point_rva = load_le32(raw, 16);
    opt.image_base = layout.image_base_width == 8 ? load_le64(raw, layout.image_base) : load_le32(raw, layout.image_base);
    opt.section_alignment = load_le32(raw, 32);
    opt.file_alignment = load_le32(raw, 36);
    opt.size_of_image = load_le32(raw, 56);
    opt.size_of_headers = load_le32(raw, 60);
    require(load_le32(raw, layout.rva_count) == data_directory_count, errc::malformed_header,
            "number_of_rva_and_sizes is not 16", oh + layout.rva_count);
    for (std::size_t i = 0; i < data_directory_count; ++i) {
        opt.data_directories[i].rva = load_le32(raw, layout.directories + 8 * i);
        opt.data_directories[i].size = load_le32(raw, layout.directories + 8 * i + 4);
    }
    detail::check_optional_invariants(opt, errc::malformed_header, oh);

    const std::uint64_t table = oh + oh_size;
    const std::uint64_t table_end = table + std::uint64_t{img.file.number_of_sections} * section_header_size;
    require(table_end <= len, errc::truncated, "section table extends past end of input", table);
    require(table_end <= opt.size_of_headers, errc::malformed_header, "section table extends past size_of_headers",
            table);

    std::uint64_t cursor = table_end; // end of the last raw content consumed
    bool have_raw = false;
    for (std::size_t i = 0; i < img.file.number_of_sections; ++i) {
        const std::uint64_t at = table + i * section_header_size;
        section s;
        s.header = detail::decode_section_header(bytes, at);
        const auto& h = s.header;
        detail::check_section_invariants(h, opt, errc::malformed_header, at);
        if (!img.sections.empty())
            require(h.virtual_address > img.sections.back().header.virtual_address, errc::malformed_header,
                    "sections not ordered by virtual_address", at + 12);
        if (h.size_of_raw_data > 0) {
            const std::uint64_t start = h.pointer_to_raw_data;
            const std::uint64_t end = start + h.size_of_raw_data;
            require(end <= len, errc::truncated, "section '" + h.name_string() + "' extends past end of input",
                    start);
            if (!have_raw) {
                require(start >= opt.size_of_headers, errc::malformed_header,
                        "first section data overlaps the headers", at + 20);
                img.header_padding.assign(bytes.begin() + static_cast<std::ptrdiff_t>(table_end),
                                          bytes.begin() + static_cast<std::ptrdiff_t>(start));
                have_raw = true;
            } else {
                require(start >= cursor, errc::malformed_header, "section data overlaps or is out of file order",
                        at + 20);
                s.gap_before.assign(bytes.begin() + static_cast<std::ptrdiff_t>(cursor),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(start));
            }
            s.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                          bytes.begin() + static_cast<std::ptrdiff_t>(end));
            cursor = end;
        }
        img.sections.push_back(std::move(s));
    }
    if (!have_raw) {
        cursor = std::max<std::uint64_t>(table_end, std::min<std::uint64_t>(opt.size_of_headers, len));
        img.header_padding.assign(bytes.begin() + static_cast<std::ptrdiff_t>(table_end),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(cursor));
    }
    img.overlay.assign(bytes.begin() + static_cast<std::ptrdiff_t>(cursor), bytes.end());
    return img;
}

/// Checks every structural invariant serialize_pe relies on.
inline void validate_image(const pe_image& img)
{
    using detail::require;
    constexpr auto bad = errc::invariant_violation;
    require(img.dos.magic == dos_magic, bad, "DOS magic is not MZ", 0);
    require(img.dos.e_lfanew == dos_header_size + img.dos_stub.size(), bad,
            "e_lfanew does not match the DOS stub length", 0x3C);
    require(img.file.number_of_sections == img.sections.size(), bad,
            "number_of_sections (" + std::to_string(img.file.number_of_sections) + ") != section count (" +
                std::to_string(img.sections.size()) + ")",
            img.dos.e_lfanew + signature_size + 2);
    require(!img.sections.empty() && img.sections.size() <= max_sections, bad, "section count out of range",
            img.dos.e_lfanew + signature_size + 2);
    const auto& opt = img.optional;
    const std::uint64_t oh = img.dos.e_lfanew + signature_size + file_header_size;
    require(opt.raw.size() == img.file.size_of_optional_header, bad,
            "optional header bytes do not match size_of_optional_header", oh);
    require(opt.magic == pe32_magic || opt.magic == pe32plus_magic, bad, "unknown optional header magic", oh);
    require(opt.raw.size() >= optional_layout::for_magic(opt.magic).standard_size, bad,
            "optional header too small", oh);
    detail::check_optional_invariants(opt, bad, oh);
    require(img.section_table_end() <= opt.size_of_headers, bad, "section table extends past size_of_headers",
            img.section_table_offset());

    std::uint64_t cursor = img.section_table_end() + img.header_padding.size();
    bool first_raw = true;
    for (std::size_t i = 0; i < img.sections.size(); ++i) {
        const auto& s = img.sections[i];
        const std::uint64_t at = img.section_table_offset() + i * section_header_size;
        detail::check_section_invariants(s.header, opt, bad, at);
        if (i > 0)
            require(s.header.virtual_address > img.sections[i - 1].header.virtual_address, bad,
                    "sections not ordered by virtual_address", at + 12);
        require(s.data.size() == s.header.size_of_raw_data, bad, "section data length != size_of_raw_data", at + 16);
        if (s.header.size_of_raw_data == 0) {
            require(s.gap_before.empty(), bad, "gap bytes before an empty section", at + 20);
            continue;
        }
        if (first_raw) {
            require(s.gap_before.empty(), bad, "gap bytes before the first section", at + 20);
            require(s.header.pointer_to_raw_data >= opt.size_of_headers, bad,
                    "first section data overlaps the headers", at + 20);
            first_raw = false;
        }
        cursor += s.gap_before.size();
        require(s.header.pointer_to_raw_data == cursor, bad, "pointer_to_raw_data does not match file layout",
                at + 20);
        cursor += s.data.size();
    }
}

/// Encode an image. Round trip on any parsed file is byte-identical.
inline byte_vector serialize_pe(const pe_image& img)
{
    validate_image(img);
    byte_vector out;
    out.reserve(img.file_size());

    append_le16(out, img.dos.magic);
    out.insert(out.end(), img.dos.reserved.begin(), img.dos.reserved.end());
    append_le32(out, img.dos.e_lfanew);
    out.insert(out.end(), img.dos_stub.begin(), img.dos_stub.end());

    append_le32(out, nt_signature);
    append_le16(out, img.file.machine);
    append_le16(out, img.file.number_of_sections);
    append_le32(out, img.file.time_date_stamp);
    append_le32(out, img.file.pointer_to_symbol_table);
    append_le32(out, img.file.number_of_symbols);
    append_le16(out, img.file.size_of_optional_header);
    append_le16(out, img.file.characteristics);

    const auto& opt = img.optional;
    const auto layout = optional_layout::for_magic(opt.magic);
    byte_vector raw = opt.raw;
    std::span<std::uint8_t> w(raw);
    store_le16(w, 0, opt.magic);
    store_le32(w, 16, opt.entry_point_rva);
    if (layout.image_base_width == 8)
        store_le64(w, layout.image_base, opt.image_base);
    else
        store_le32(w, layout.image_base, static_cast<std::uint32_t>(opt.image_base));
    store_le32(w, 32, opt.section_alignment);
    store_le32(w, 36, opt.file_alignment);
    store_le32(w, 56, opt.size_of_image);
    store_le32(w, 60, opt.size_of_headers);
    store_le32(w, layout.rva_count, static_cast<std::uint32_t>(data_directory_count));
    for (std::size_t i = 0; i < data_directory_count; ++i) {
        store_le32(w, layout.directories + 8 * i, opt.data_directories[i].rva);
        store_le32(w, layout.directories + 8 * i + 4, opt.data_directories[i].size);
    }
    out.insert(out.end(), raw.begin(), raw.end());

    for (const auto& s : img.sections)
        detail::encode_section_header(out, s.header);
    out.insert(out.end(), img.header_padding.begin(), img.header_padding.end());
    for (const auto& s : img.sections) {
        out.insert(out.end(), s.gap_before.begin(), s.gap_before.end());
        out.insert(out.end(), s.data.begin(), s.data.end());
    }
    out.insert(out.end(), img.overlay.begin(), img.overlay.end());
    return out;
}

/// First section flagged executable, in table order.
inline const section* find_code_section(const pe_image& img)
{
    for (const auto& s : img.sections)
        if (s.header.is_executable())
            return &s;
    return nullptr;
}

} // namespace malfox::pe

#endif // MALFOX_PE_MODEL_HPP
