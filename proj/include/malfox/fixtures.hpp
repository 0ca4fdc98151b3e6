#ifndef MALFOX_FIXTURES_HPP
#define MALFOX_FIXTURES_HPP

// Deterministic synthesis of small, well-formed PE32 files.
//
// Layout of a synthesized image (RVAs relative to image_base):
//   .text   code bytes, entry point at its first byte
//   .idata  import descriptors, INTs, IATs, hint/name entries, DLL names
//   .data   NUL-terminated data strings (third section, when requested)
//   .sN     seeded filler for any further sections

#include <malfox/bytes.hpp>
#include <malfox/error.hpp>
#include <malfox/kv.hpp>
#include <malfox/pe_model.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace malfox::pe {

struct import_spec {
    std::string dll;
    std::vector<std::string> functions;
    std::vector<std::uint16_t> ordinals; // emitted as IMAGE_ORDINAL_FLAG thunks after the named ones
    bool iat_only = false;               // leave OriginalFirstThunk zero

    bool operator==(const import_spec&) const = default;
};

struct fixture_spec {
    std::vector<import_spec> imports;
    std::uint32_t section_count = 2;
    std::uint32_t file_alignment = 0x200;
    std::uint32_t section_alignment = 0x1000;
    std::uint32_t code_size = 0x100;
    double code_randomness = 0.0; // fraction of code bytes drawn uniformly at random
    std::vector<std::string> data_strings;
    std::uint32_t spare_header_slots = 4; // zeroed section-header slots left for the editor
    std::uint32_t overlay_size = 0;
    std::uint32_t image_base = 0x400000;
    bool dll = false;
    std::uint64_t seed = 0;

    /// Keys: file_alignment, section_alignment, sections, code_size, code_randomness,
    /// spare_header_slots, overlay_size, image_base, dll, seed, and repeatable
    /// `import = dll: Func1, Func2, #7` (`#n` is an ordinal) and `data = text`.
    /// `iat_import = ...` declares a descriptor without an INT.
    static fixture_spec from_kv(const kv_document& doc)
    {
        fixture_spec s;
        s.file_alignment = doc.get_int<std::uint32_t>("file_alignment", s.file_alignment);
        s.section_alignment = doc.get_int<std::uint32_t>("section_alignment", s.section_alignment);
        s.section_count = doc.get_int<std::uint32_t>("sections", s.section_count);
        s.code_size = doc.get_int<std::uint32_t>("code_size", s.code_size);
        s.code_randomness = doc.get_double("code_randomness", s.code_randomness);
        s.spare_header_slots = doc.get_int<std::uint32_t>("spare_header_slots", s.spare_header_slots);
        s.overlay_size = doc.get_int<std::uint32_t>("overlay_size", s.overlay_size);
        s.image_base = doc.get_int<std::uint32_t>("image_base", s.image_base);
        s.dll = doc.get_int<int>("dll", 0) != 0;
        s.seed = doc.get_int<std::uint64_t>("seed", 0);
        for (const auto& [key, value] : doc.entries()) {
            if (key == "import" || key == "iat_import")
                s.imports.push_back(parse_import(value, key == "iat_import"));
            else if (key == "data")
                s.data_strings.push_back(value);
        }
        return s;
    }

    static import_spec parse_import(const std::string& text, bool iat_only)
    {
        import_spec imp;
        imp.iat_only = iat_only;
        auto colon = text.find(':');
        imp.dll = kv_document::trim(text.substr(0, colon));
        if (imp.dll.empty())
            throw error(errc::config_invalid, "import without a DLL name: " + text);
        if (colon == std::string::npos)
            return imp;
        std::string rest = text.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            auto comma = rest.find(',', pos);
            auto item = kv_document::trim(rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
            if (!item.empty()) {
                if (item[0] == '#')
                    imp.ordinals.push_back(kv_document::parse_int<std::uint16_t>("import", item.substr(1)));
                else
                    imp.functions.push_back(item);
            }
            if (comma == std::string::npos)
                break;
            pos = comma + 1;
        }
        return imp;
    }
};

namespace detail {

// Classic "This program cannot be run in DOS mode" real-mode stub.
inline byte_vector classic_dos_stub()
{
    byte_vector stub = {0x0E, 0x1F, 0xBA, 0x0E, 0x00, 0xB4, 0x09, 0xCD, 0x21, 0xB8, 0x01, 0x4C, 0xCD, 0x21};
    const std::string msg = "This program cannot be run in DOS mode.\r\r\n$";
    stub.insert(stub.end(), msg.begin(), msg.end());
    stub.resize(64, 0);
    return stub;
}

inline byte_vector synth_code(std::uint32_t size, double randomness, std::mt19937_64& rng)
{
    // push ebp; mov ebp, esp; sub esp, 16; xor eax, eax; mov [ebp-4], eax; nop; leave; ret
    static constexpr std::uint8_t pattern[] = {0x55, 0x8B, 0xEC, 0x83, 0xEC, 0x10, 0x33, 0xC0,
                                               0x89, 0x45, 0xFC, 0x90, 0xC9, 0xC3, 0xCC, 0xCC};
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    byte_vector code(size);
    for (std::uint32_t i = 0; i < size; ++i) {
        const auto r = rng();
        code[i] = coin(rng) < randomness ? static_cast<std::uint8_t>(r) : pattern[i % sizeof(pattern)];
    }
    return code;
}

struct idata_blob {
    byte_vector bytes;
    data_directory import_dir;
    data_directory iat_dir;
};

inline idata_blob synth_idata(const std::vector<import_spec>& imports, std::uint32_t base_rva)
{
    idata_blob blob;
    if (imports.empty()) {
        blob.bytes.assign(16, 0);
        return blob;
    }
    const std::uint32_t desc_bytes = static_cast<std::uint32_t>((imports.size() + 1) * 20);
    std::uint32_t thunk_bytes = 0;
    for (const auto& imp : imports)
        thunk_bytes += static_cast<std::uint32_t>((imp.functions.size() + imp.ordinals.size() + 1) * 4);

    const std::uint32_t int_off = desc_bytes;
    const std::uint32_t iat_off = int_off + thunk_bytes;
    std::uint32_t names_off = iat_off + thunk_bytes;

    // Hint/name entries and DLL names, laid out after the thunk arrays.
    byte_vector names;
    std::vector<std::vector<std::uint32_t>> thunks(imports.size());
    std::vector<std::uint32_t> dll_name_rva(imports.size());
    for (std::size_t d = 0; d < imports.size(); ++d) {
        std::uint16_t hint = 0;
        for (const auto& fn : imports[d].functions) {
            thunks[d].push_back(base_rva + names_off + static_cast<std::uint32_t>(names.size()));
            append_le16(names, hint++);
            names.insert(names.end(), fn.begin(), fn.end());
            names.push_back(0);
            if (names.size() % 2 != 0)
                names.push_back(0);
        }
        for (auto ord : imports[d].ordinals)
            thunks[d].push_back(0x80000000u | ord);
    }
    for (std::size_t d = 0; d < imports.size(); ++d) {
        dll_name_rva[d] = base_rva + names_off + static_cast<std::uint32_t>(names.size());
        names.insert(names.end(), imports[d].dll.begin(), imports[d].dll.end());
        names.push_back(0);
    }

    auto& out = blob.bytes;
    out.assign(names_off, 0);
    std::span<std::uint8_t> w(out);
    std::uint32_t cursor = 0;
    for (std::size_t d = 0; d < imports.size(); ++d) {
        const std::uint32_t d_off = static_cast<std::uint32_t>(d * 20);
        if (!imports[d].iat_only)
            store_le32(w, d_off, base_rva + int_off + cursor);
        store_le32(w, d_off + 12, dll_name_rva[d]);
        store_le32(w, d_off + 16, base_rva + iat_off + cursor);
        for (auto t : thunks[d]) {
            store_le32(w, int_off + cursor, imports[d].iat_only ? 0 : t);
            store_le32(w, iat_off + cursor, t);
            cursor += 4;
        }
        cursor += 4; // NULL terminator
    }
    out.insert(out.end(), names.begin(), names.end());
    blob.import_dir = {base_rva, desc_bytes};
    blob.iat_dir = {base_rva + iat_off, thunk_bytes};
    return blob;
}

} // namespace detail

/// Build a well-formed PE32 file from `spec`. Same spec (including seed) gives the same bytes.
inline byte_vector synthesize_min_pe(const fixture_spec& spec)
{
    if (!is_power_of_two(spec.file_alignment) || spec.file_alignment < min_file_alignment)
        throw error(errc::config_invalid, "file_alignment must be a power of two >= 512");
    if (spec.section_alignment < spec.file_alignment || !is_power_of_two(spec.section_alignment))
        throw error(errc::config_invalid, "section_alignment must be a power of two >= file_alignment");
    if (spec.section_count < 2 || spec.section_count > max_sections)
        throw error(errc::config_invalid, "section count must be in [2, 96]");
    if (!spec.data_strings.empty() && spec.section_count < 3)
        throw error(errc::config_invalid, "data strings need a third section");
    if (spec.code_size == 0)
        throw error(errc::config_invalid, "code_size must be positive");

    std::mt19937_64 rng(spec.seed);

    pe_image img;
    img.dos_stub = detail::classic_dos_stub();
    img.dos.e_lfanew = static_cast<std::uint32_t>(dos_header_size + img.dos_stub.size());
    // e_cblp, e_cp, e_cparhdr, e_maxalloc, e_sp, e_lfarlc as a typical linker writes them.
    std::span<std::uint8_t> dr(img.dos.reserved);
    store_le16(dr, 0, 0x90);
    store_le16(dr, 2, 3);
    store_le16(dr, 6, 4);
    store_le16(dr, 10, 0xFFFF);
    store_le16(dr, 14, 0xB8);
    store_le16(dr, 22, 0x40);

    img.file.machine = 0x14C;
    img.file.number_of_sections = static_cast<std::uint16_t>(spec.section_count);
    img.file.size_of_optional_header = optional_header_size_pe32;
    img.file.characteristics = spec.dll ? 0x2102 : 0x0102;

    const std::uint64_t table_end = img.section_table_offset() + std::uint64_t{spec.section_count} * section_header_size;
    const std::uint64_t headers =
        align_up(table_end + std::uint64_t{spec.spare_header_slots} * section_header_size, spec.file_alignment);

    // Section contents first; RVAs depend only on the alignment chain.
    std::vector<std::string> names;
    std::vector<byte_vector> contents;
    std::vector<std::uint32_t> flags;
    std::uint64_t va = align_up(headers, spec.section_alignment);
    std::vector<std::uint64_t> vas;

    auto code = detail::synth_code(spec.code_size, spec.code_randomness, rng);
    names.push_back(".text");
    vas.push_back(va);
    flags.push_back(scn::cnt_code | scn::mem_execute | scn::mem_read);
    va = align_up(va + code.size(), spec.section_alignment);
    contents.push_back(std::move(code));

    if (va > 0xFFFFFFFFull)
        throw error(errc::spec_too_large, "image exceeds 32-bit RVA space");
    auto idata = detail::synth_idata(spec.imports, static_cast<std::uint32_t>(va));
    names.push_back(".idata");
    vas.push_back(va);
    flags.push_back(scn::cnt_initialized_data | scn::mem_read | scn::mem_write);
    va = align_up(va + idata.bytes.size(), spec.section_alignment);
    contents.push_back(idata.bytes);

    for (std::uint32_t i = 2; i < spec.section_count; ++i) {
        byte_vector blob;
        if (i == 2 && !spec.data_strings.empty()) {
            for (const auto& s : spec.data_strings) {
                blob.insert(blob.end(), s.begin(), s.end());
                blob.push_back(0);
            }
            names.push_back(".data");
        } else {
            blob.resize(64);
            for (auto& b : blob)
                b = static_cast<std::uint8_t>(0x20 + rng() % 0x5F);
            names.push_back(".s" + std::to_string(i));
        }
        vas.push_back(va);
        flags.push_back(scn::cnt_initialized_data | scn::mem_read);
        va = align_up(va + blob.size(), spec.section_alignment);
        contents.push_back(std::move(blob));
    }
    if (va > 0xFFFFFFFFull)
        throw error(errc::spec_too_large, "image exceeds 32-bit RVA space");

    std::uint64_t file_cursor = headers;
    std::uint32_t size_of_code = 0;
    std::uint32_t size_of_init = 0;
    for (std::size_t i = 0; i < contents.size(); ++i) {
        section s;
        s.header.name = make_section_name(names[i]);
        s.header.virtual_size = static_cast<std::uint32_t>(contents[i].size());
        s.header.virtual_address = static_cast<std::uint32_t>(vas[i]);
        s.header.size_of_raw_data = static_cast<std::uint32_t>(align_up(contents[i].size(), spec.file_alignment));
        s.header.pointer_to_raw_data = static_cast<std::uint32_t>(file_cursor);
        s.header.characteristics = flags[i];
        s.data = std::move(contents[i]);
        s.data.resize(s.header.size_of_raw_data, 0);
        file_cursor += s.header.size_of_raw_data;
        (i == 0 ? size_of_code : size_of_init) += s.header.size_of_raw_data;
        img.sections.push_back(std::move(s));
    }
    if (file_cursor + spec.overlay_size > 0xFFFFFFFFull)
        throw error(errc::spec_too_large, "file exceeds 32-bit offsets");

    auto& opt = img.optional;
    opt.magic = pe32_magic;
    opt.entry_point_rva = img.sections[0].header.virtual_address;
    opt.image_base = spec.image_base;
    opt.section_alignment = spec.section_alignment;
    opt.file_alignment = spec.file_alignment;
    opt.size_of_image = static_cast<std::uint32_t>(va);
    opt.size_of_headers = static_cast<std::uint32_t>(headers);
    opt.dir(directory::import_table) = idata.import_dir;
    opt.dir(directory::iat) = idata.iat_dir;
    opt.raw.assign(optional_header_size_pe32, 0);
    std::span<std::uint8_t> raw(opt.raw);
    raw[2] = 14; // linker 14.0
    store_le32(raw, 4, size_of_code);
    store_le32(raw, 8, size_of_init);
    store_le32(raw, 20, img.sections[0].header.virtual_address); // BaseOfCode
    store_le32(raw, 24, img.sections[1].header.virtual_address); // BaseOfData
    store_le16(raw, 40, 6);                                      // OS version
    store_le16(raw, 48, 6);                                      // subsystem version
    store_le16(raw, 68, 3);                                      // console subsystem
    store_le32(raw, 72, 0x100000);
    store_le32(raw, 76, 0x1000);
    store_le32(raw, 80, 0x100000);
    store_le32(raw, 84, 0x1000);

    img.header_padding.assign(headers - table_end, 0);
    img.overlay.resize(spec.overlay_size);
    for (auto& b : img.overlay)
        b = static_cast<std::uint8_t>(rng());
    return serialize_pe(img);
}

} // namespace malfox::pe

#endif // MALFOX_FIXTURES_HPP
