#ifndef MALFOX_PE_EDITOR_HPP
#define MALFOX_PE_EDITOR_HPP

// Structural perturbations of PE files. Every operation appends; no existing
// byte of the input image is moved. Payload stubs are opaque registered
// images and are never executed.

#include <malfox/bytes.hpp>
#include <malfox/error.hpp>
#include <malfox/pe_model.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace malfox::editor {

using pe::pe_image;

inline constexpr std::uint8_t default_key = 0x15;

enum class method { obfusmal = 0, stealmal = 1, hollowmal = 2 };

inline constexpr std::array<method, 3> method_order = {method::obfusmal, method::stealmal, method::hollowmal};

constexpr std::string_view to_string(method m) noexcept
{
    switch (m) {
    case method::obfusmal: return "obfusmal";
    case method::stealmal: return "stealmal";
    case method::hollowmal: return "hollowmal";
    }
    return "?";
}

/// Sections each method adds to the image it produces.
constexpr std::size_t sections_contributed(method m) noexcept { return m == method::hollowmal ? 2 : 1; }

/// Which methods to chain, in (Obfusmal, Stealmal, Hollowmal) order, plus the
/// per-method selector values in [0, 1) used to pick an instance.
struct perturbation_path {
    std::array<bool, 3> bits{};
    std::array<double, 3> noise{};

    bool uses(method m) const noexcept { return bits[static_cast<std::size_t>(m)]; }

    /// "110" style literal. Anything but three '0'/'1' characters is rejected.
    static perturbation_path from_string(std::string_view text)
    {
        if (text.size() != 3)
            throw error(errc::config_invalid, "perturbation path must be three characters of 0/1");
        perturbation_path p;
        for (std::size_t i = 0; i < 3; ++i) {
            if (text[i] != '0' && text[i] != '1')
                throw error(errc::config_invalid, "invalid perturbation path '" + std::string(text) + "'");
            p.bits[i] = text[i] == '1';
        }
        return p;
    }

    std::string to_string() const
    {
        std::string s;
        for (bool b : bits)
            s.push_back(b ? '1' : '0');
        return s;
    }

    bool operator==(const perturbation_path&) const = default;
};

/// All eight expressible paths, identity first.
inline std::array<perturbation_path, 8> all_paths()
{
    std::array<perturbation_path, 8> out{};
    static constexpr const char* literals[] = {"000", "100", "010", "001", "110", "101", "011", "111"};
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = perturbation_path::from_string(literals[i]);
    return out;
}

/// Half-open interval [k/count, (k+1)/count) selects instance k.
inline std::size_t noise_to_instance(double u, std::size_t count)
{
    if (count == 0)
        throw error(errc::empty_registry, "no instances to select from");
    if (!(u > 0.0))
        return 0;
    const double scaled = std::floor(u * static_cast<double>(count));
    if (scaled >= static_cast<double>(count))
        return count - 1;
    return static_cast<std::size_t>(scaled);
}

inline byte_vector xor_transform(byte_span data, std::uint8_t key)
{
    byte_vector out(data.begin(), data.end());
    for (auto& b : out)
        b ^= key;
    return out;
}

/// Four little-endian u32 values written at offset 0 of a stub section so a
/// loader stub could find what it must undo.
struct param_block {
    static constexpr std::size_t size = 16;

    std::uint32_t address = 0;
    std::uint32_t length = 0;
    std::uint32_t extra = 0; // original OEP (Obfusmal) or payload section index (Hollowmal)
    std::uint32_t key = 0;

    byte_vector encode() const
    {
        byte_vector out;
        append_le32(out, address);
        append_le32(out, length);
        append_le32(out, extra);
        append_le32(out, key);
        return out;
    }

    static param_block decode(byte_span b)
    {
        if (b.size() < size)
            throw error(errc::truncated, "parameter block shorter than 16 bytes");
        return {load_le32(b, 0), load_le32(b, 4), load_le32(b, 8), load_le32(b, 12)};
    }

    bool operator==(const param_block&) const = default;
};

namespace section_flags {
inline constexpr std::uint32_t code = pe::scn::cnt_code | pe::scn::mem_execute | pe::scn::mem_read | pe::scn::mem_write;
inline constexpr std::uint32_t data = pe::scn::cnt_initialized_data | pe::scn::mem_read;
} // namespace section_flags

/// Append one section holding `payload`. The new section starts at the old
/// end of file (overlay bytes become its leading gap) and at the old
/// size_of_image in memory.
inline pe_image add_section(const pe_image& image, byte_span payload, const std::array<std::uint8_t, 8>& name,
                            std::uint32_t characteristics = section_flags::data)
{
    if (!image.is_pe32())
        throw error(errc::not_pe32, "editor only handles PE32 images");
    if (payload.empty())
        throw error(errc::invariant_violation, "empty section payload");
    if (image.sections.size() + 1 > pe::max_sections)
        throw error(errc::too_many_sections, "image already has " + std::to_string(image.sections.size()) + " sections");

    const std::uint64_t table_end = image.section_table_end();
    const bool slot_free = image.header_padding.size() >= pe::section_header_size &&
                           table_end + pe::section_header_size <= image.optional.size_of_headers &&
                           std::all_of(image.header_padding.begin(),
                                       image.header_padding.begin() + pe::section_header_size,
                                       [](std::uint8_t b) { return b == 0; });
    if (!slot_free)
        throw error(errc::no_header_space, "no zeroed room for another section header", table_end);

    pe_image out = image;
    const auto& opt = out.optional;
    const std::uint64_t old_size = image.file_size();
    const std::uint64_t raw_ptr = align_up(old_size, opt.file_alignment);
    const std::uint64_t raw_size = align_up(payload.size(), opt.file_alignment);
    const std::uint64_t va = align_up(opt.size_of_image, opt.section_alignment);
    const std::uint64_t new_image_size = align_up(va + payload.size(), opt.section_alignment);
    if (raw_ptr + raw_size > 0xFFFFFFFFull || new_image_size > 0xFFFFFFFFull)
        throw error(errc::spec_too_large, "appended section exceeds 32-bit addressing");
    if (!image.sections.empty() && va <= image.sections.back().header.virtual_address)
        throw error(errc::invariant_violation, "size_of_image does not cover the last section");

    pe::section s;
    s.header.name = name;
    s.header.virtual_size = static_cast<std::uint32_t>(payload.size());
    s.header.virtual_address = static_cast<std::uint32_t>(va);
    s.header.size_of_raw_data = static_cast<std::uint32_t>(raw_size);
    s.header.pointer_to_raw_data = static_cast<std::uint32_t>(raw_ptr);
    s.header.characteristics = characteristics;
    s.data.assign(payload.begin(), payload.end());
    s.data.resize(raw_size, 0);

    byte_vector lead = std::move(out.overlay);
    out.overlay.clear();
    lead.resize(lead.size() + (raw_ptr - old_size), 0);
    const bool has_raw = std::any_of(out.sections.begin(), out.sections.end(),
                                     [](const pe::section& x) { return x.header.size_of_raw_data > 0; });
    out.header_padding.erase(out.header_padding.begin(),
                             out.header_padding.begin() + pe::section_header_size);
    if (has_raw)
        s.gap_before = std::move(lead);
    else
        out.header_padding.insert(out.header_padding.end(), lead.begin(), lead.end());

    out.sections.push_back(std::move(s));
    out.file.number_of_sections = static_cast<std::uint16_t>(out.sections.size());
    out.optional.size_of_image = static_cast<std::uint32_t>(new_image_size);
    pe::validate_image(out);
    return out;
}

/// Encrypt the first executable section in place, append the stub (prefixed
/// by its parameter block) and point the entry at stub OEP + old size_of_image.
inline pe_image obfusmal(const pe_image& image, byte_span stub, std::uint8_t key = default_key)
{
    if (!image.is_pe32())
        throw error(errc::not_pe32, "editor only handles PE32 images");
    const auto stub_image = pe::parse_pe(stub);

    pe_image work = image;
    auto code = std::find_if(work.sections.begin(), work.sections.end(),
                             [](const pe::section& s) { return s.header.is_executable(); });
    if (code == work.sections.end() || code->data.empty())
        throw error(errc::no_code_section, "no executable section with file data");
    code->data = xor_transform(code->data, key);

    const param_block block{code->header.pointer_to_raw_data, code->header.size_of_raw_data,
                            image.optional.entry_point_rva, key};
    byte_vector payload = block.encode();
    payload.insert(payload.end(), stub.begin(), stub.end());

    const std::uint32_t old_image_size = image.optional.size_of_image;
    pe_image out = add_section(work, payload, pe::make_section_name(".shell"), section_flags::code);
    out.optional.entry_point_rva = stub_image.optional.entry_point_rva + old_image_size;
    return out;
}

/// The host with one more section: the whole input file, encrypted.
inline pe_image stealmal(const pe_image& image, byte_span host, std::uint8_t key = default_key)
{
    const auto host_image = pe::parse_pe(host);
    const auto payload = xor_transform(pe::serialize_pe(image), key);
    return add_section(host_image, payload, pe::make_section_name(".steal"), section_flags::data);
}

/// The benign host with the encrypted input as its second-to-last section and
/// the hollowing DLL (prefixed by its parameter block) as the last.
inline pe_image hollowmal(const pe_image& image, byte_span benign_host, byte_span hollow_dll,
                          std::uint8_t key = default_key)
{
    const auto host_image = pe::parse_pe(benign_host);
    const auto dll_image = pe::parse_pe(hollow_dll);
    if (!dll_image.is_pe32())
        throw error(errc::not_pe32, "hollow DLL is not PE32");

    const auto payload = xor_transform(pe::serialize_pe(image), key);
    pe_image staged = add_section(host_image, payload, pe::make_section_name(".hpay"), section_flags::data);

    const auto& payload_section = staged.sections.back();
    const param_block block{payload_section.header.pointer_to_raw_data, static_cast<std::uint32_t>(payload.size()),
                            static_cast<std::uint32_t>(staged.sections.size() - 1), key};
    byte_vector dll_payload = block.encode();
    dll_payload.insert(dll_payload.end(), hollow_dll.begin(), hollow_dll.end());
    return add_section(staged, dll_payload, pe::make_section_name(".hollow"), section_flags::code);
}

/// Registered payload images per method. Hollowmal instances are the cross
/// product of hosts and DLLs: instance i uses host i / |dlls| and DLL i % |dlls|.
struct stub_registry {
    std::vector<byte_vector> obfusmal_stubs;
    std::vector<byte_vector> stealmal_hosts;
    std::vector<byte_vector> hollowmal_hosts;
    std::vector<byte_vector> hollowmal_dlls;

    std::size_t instance_count(method m) const noexcept
    {
        switch (m) {
        case method::obfusmal: return obfusmal_stubs.size();
        case method::stealmal: return stealmal_hosts.size();
        case method::hollowmal: return hollowmal_hosts.size() * hollowmal_dlls.size();
        }
        return 0;
    }

    /// Every payload must parse as PE32.
    void validate() const
    {
        auto check = [](const std::vector<byte_vector>& list, std::string_view what) {
            for (std::size_t i = 0; i < list.size(); ++i) {
                try {
                    if (!pe::parse_pe(list[i]).is_pe32())
                        throw error(errc::not_pe32, "not PE32");
                } catch (const error& e) {
                    throw error(e.code(), std::string(what) + " #" + std::to_string(i) + ": " + e.what());
                }
            }
        };
        check(obfusmal_stubs, "obfusmal stub");
        check(stealmal_hosts, "stealmal host");
        check(hollowmal_hosts, "hollowmal host");
        check(hollowmal_dlls, "hollowmal dll");
    }

    /// Manifest lines are `method<TAB>path`; methods are obfusmal, stealmal,
    /// hollowmal-host and hollowmal-dll. Relative paths resolve against `base`.
    static stub_registry from_manifest(const std::string& text, const std::filesystem::path& base)
    {
        stub_registry reg;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty() || line[0] == '#')
                continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw error(errc::format_error, "registry line " + std::to_string(line_no) + ": expected method<TAB>path");
            const auto kind = line.substr(0, tab);
            std::filesystem::path path = line.substr(tab + 1);
            if (path.is_relative())
                path = base / path;
            auto bytes = read_file(path);
            if (kind == "obfusmal")
                reg.obfusmal_stubs.push_back(std::move(bytes));
            else if (kind == "stealmal")
                reg.stealmal_hosts.push_back(std::move(bytes));
            else if (kind == "hollowmal-host")
                reg.hollowmal_hosts.push_back(std::move(bytes));
            else if (kind == "hollowmal-dll")
                reg.hollowmal_dlls.push_back(std::move(bytes));
            else
                throw error(errc::format_error, "registry line " + std::to_string(line_no) + ": unknown method '" + kind + "'");
        }
        reg.validate();
        return reg;
    }
};

struct edit_report {
    std::string input_hash;
    std::string output_hash;
    std::vector<std::pair<method, std::size_t>> applied;
    std::size_t sections_added = 0;
    std::uint32_t oep_before = 0;
    std::uint32_t oep_after = 0;

    std::string to_text() const
    {
        std::ostringstream os;
        os << "input_hash=" << input_hash << '\n' << "output_hash=" << output_hash << '\n' << "applied=";
        for (std::size_t i = 0; i < applied.size(); ++i)
            os << (i ? "," : "") << to_string(applied[i].first) << ':' << applied[i].second;
        os << '\n'
           << "sections_added=" << sections_added << '\n'
           << "oep_before=0x" << std::hex << oep_before << '\n'
           << "oep_after=0x" << oep_after << std::dec << '\n';
        return os.str();
    }
};

/// Chain the selected methods left to right, each consuming the previous output.
inline std::pair<pe_image, edit_report> apply_path(const pe_image& image, const perturbation_path& path,
                                                   const stub_registry& registry, std::uint8_t key = default_key)
{
    edit_report report;
    report.input_hash = sha256_hex(pe::serialize_pe(image));
    report.oep_before = image.optional.entry_point_rva;

    pe_image current = image;
    for (auto m : method_order) {
        if (!path.uses(m))
            continue;
        const auto count = registry.instance_count(m);
        if (count == 0)
            throw error(errc::empty_registry, "no registered instances for " + std::string(to_string(m)));
        const auto idx = noise_to_instance(path.noise[static_cast<std::size_t>(m)], count);
        switch (m) {
        case method::obfusmal:
            current = obfusmal(current, registry.obfusmal_stubs[idx], key);
            break;
        case method::stealmal:
            current = stealmal(current, registry.stealmal_hosts[idx], key);
            break;
        case method::hollowmal: {
            const auto dlls = registry.hollowmal_dlls.size();
            current = hollowmal(current, registry.hollowmal_hosts[idx / dlls], registry.hollowmal_dlls[idx % dlls], key);
            break;
        }
        }
        report.applied.emplace_back(m, idx);
        report.sections_added += sections_contributed(m);
    }
    report.output_hash = sha256_hex(pe::serialize_pe(current));
    report.oep_after = current.optional.entry_point_rva;
    return {std::move(current), std::move(report)};
}

} // namespace malfox::editor

#endif // MALFOX_PE_EDITOR_HPP
