#ifndef MALFOX_PE_PARSER_HPP
#define MALFOX_PE_PARSER_HPP

#include <malfox/bytes.hpp>
#include <malfox/error.hpp>
#include <malfox/pe_model.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace malfox::pe {

struct import_entry {
    std::string dll_name;                    // lowercase
    std::vector<std::string> function_names; // lowercase, never empty strings
    std::size_t by_ordinal_count = 0;

    bool operator==(const import_entry&) const = default;
};

struct import_limits {
    std::size_t max_descriptors = 4096;
    std::size_t max_thunks = 65536;
    std::size_t max_name_length = 4096;
};

/// FOA = RVA - SectionRVA + SectionFOA for the section containing `rva`.
inline std::uint32_t rva_to_foa(std::uint32_t rva, std::span<const section_header> sections)
{
    for (const auto& s : sections) {
        const std::uint64_t extent = std::max(s.virtual_size, s.size_of_raw_data);
        if (rva >= s.virtual_address && rva < s.virtual_address + extent)
            return rva - s.virtual_address + s.pointer_to_raw_data;
    }
    throw error(errc::unmapped_rva, "RVA 0x" + [&] {
        std::ostringstream os;
        os << std::hex << rva;
        return os.str();
    }() + " is not inside any section");
}

/// The reverse substitution; `foa` must lie in some section's raw data.
inline std::uint32_t foa_to_rva(std::uint32_t foa, std::span<const section_header> sections)
{
    for (const auto& s : sections) {
        if (s.size_of_raw_data > 0 && foa >= s.pointer_to_raw_data &&
            std::uint64_t{foa} < std::uint64_t{s.pointer_to_raw_data} + s.size_of_raw_data)
            return foa - s.pointer_to_raw_data + s.virtual_address;
    }
    throw error(errc::unmapped_rva, "file offset is not inside any section", foa);
}

inline std::vector<section_header> section_headers(const pe_image& img)
{
    std::vector<section_header> out;
    out.reserve(img.sections.size());
    for (const auto& s : img.sections)
        out.push_back(s.header);
    return out;
}

inline std::string to_lower_ascii(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

namespace detail {

/// Reads file-backed bytes addressed by RVA, going through the FOA conversion.
class rva_reader {
public:
    explicit rva_reader(const pe_image& img) : img_(img), headers_(section_headers(img)) {}

    std::uint64_t read(std::uint32_t rva, std::size_t width) const
    {
        auto [sec, off] = locate(rva);
        if (off + width > sec->data.size())
            throw error(errc::unmapped_rva, "read beyond file-backed section data", sec->header.pointer_to_raw_data + off);
        byte_span b(sec->data);
        return width == 8 ? load_le64(b, off) : load_le32(b, off);
    }

    std::string read_cstring(std::uint32_t rva, std::size_t max_len) const
    {
        auto [sec, off] = locate(rva);
        std::string s;
        for (std::size_t i = off; i < sec->data.size(); ++i) {
            if (sec->data[i] == 0)
                return s;
            if (s.size() >= max_len)
                throw error(errc::cyclic_or_overlong, "name longer than limit", sec->header.pointer_to_raw_data + off);
            s.push_back(static_cast<char>(sec->data[i]));
        }
        throw error(errc::truncated, "unterminated name", sec->header.pointer_to_raw_data + off);
    }

private:
    std::pair<const section*, std::size_t> locate(std::uint32_t rva) const
    {
        const std::uint32_t foa = rva_to_foa(rva, headers_);
        for (const auto& s : img_.sections) {
            const std::uint64_t extent = std::max(s.header.virtual_size, s.header.size_of_raw_data);
            if (rva >= s.header.virtual_address && rva < s.header.virtual_address + extent)
                return {&s, foa - s.header.pointer_to_raw_data};
        }
        throw error(errc::unmapped_rva, "RVA not inside any section");
    }

    const pe_image& img_;
    std::vector<section_header> headers_;
};

} // namespace detail

/// One entry per import descriptor, in file order. Names come from the INT,
/// or from the IAT when OriginalFirstThunk is zero. Ordinal thunks are
/// counted and excluded.
inline std::vector<import_entry> walk_imports(const pe_image& img, const import_limits& limits = {})
{
    std::vector<import_entry> out;
    const auto dir = img.optional.dir(directory::import_table);
    if (dir.rva == 0)
        return out;

    const detail::rva_reader reader(img);
    const bool wide = !img.is_pe32();
    const std::size_t thunk_width = wide ? 8 : 4;
    const std::uint64_t ordinal_flag = wide ? 0x8000000000000000ull : 0x80000000ull;
    std::size_t thunks_seen = 0;

    for (std::size_t index = 0;; ++index) {
        if (index >= limits.max_descriptors)
            throw error(errc::cyclic_or_overlong, "more than " + std::to_string(limits.max_descriptors) +
                                                      " import descriptors");
        const std::uint32_t desc = dir.rva + static_cast<std::uint32_t>(index * 20);
        std::uint32_t original_first_thunk = 0, name_rva = 0, first_thunk = 0;
        try {
            original_first_thunk = static_cast<std::uint32_t>(reader.read(desc, 4));
            const auto time_stamp = reader.read(desc + 4, 4);
            const auto forwarder = reader.read(desc + 8, 4);
            name_rva = static_cast<std::uint32_t>(reader.read(desc + 12, 4));
            first_thunk = static_cast<std::uint32_t>(reader.read(desc + 16, 4));
            if ((original_first_thunk | time_stamp | forwarder | name_rva | first_thunk) == 0)
                break;

            import_entry entry;
            entry.dll_name = to_lower_ascii(reader.read_cstring(name_rva, limits.max_name_length));
            if (entry.dll_name.empty())
                throw error(errc::malformed_header, "empty DLL name");
            const std::uint32_t thunk_rva = original_first_thunk != 0 ? original_first_thunk : first_thunk;
            for (std::size_t j = 0;; ++j) {
                if (++thunks_seen > limits.max_thunks)
                    throw error(errc::cyclic_or_overlong, "more than " + std::to_string(limits.max_thunks) + " thunks");
                const auto value = reader.read(thunk_rva + static_cast<std::uint32_t>(j * thunk_width), thunk_width);
                if (value == 0)
                    break;
                if (value & ordinal_flag) {
                    ++entry.by_ordinal_count;
                    continue;
                }
                // IMAGE_IMPORT_BY_NAME: 2-byte hint, then the name.
                auto name = reader.read_cstring(static_cast<std::uint32_t>(value) + 2, limits.max_name_length);
                if (name.empty())
                    throw error(errc::malformed_header, "empty function name in " + entry.dll_name);
                entry.function_names.push_back(to_lower_ascii(std::move(name)));
            }
            out.push_back(std::move(entry));
        } catch (const error& e) {
            if (e.code() == errc::unmapped_rva)
                throw error(errc::unmapped_rva, "import descriptor " + std::to_string(index) + ": " + e.what());
            throw;
        }
    }
    return out;
}

using feature_set = std::set<std::string>;

/// DLL names and non-ordinal function names, one flat lowercase namespace.
inline feature_set extract_features(const pe_image& img, const import_limits& limits = {})
{
    feature_set out;
    for (const auto& entry : walk_imports(img, limits)) {
        out.insert(entry.dll_name);
        out.insert(entry.function_names.begin(), entry.function_names.end());
    }
    return out;
}

class vocabulary {
public:
    vocabulary() = default;

    /// `names` must be sorted, unique, lowercase and non-empty.
    explicit vocabulary(std::vector<std::string> names) : names_(std::move(names))
    {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            const auto& n = names_[i];
            if (n.empty() || n != to_lower_ascii(n))
                throw error(errc::format_error, "vocabulary entry " + std::to_string(i) + " is not a lowercase name");
            if (i > 0 && !(names_[i - 1] < n))
                throw error(errc::format_error, "vocabulary not sorted and unique at entry " + std::to_string(i));
            index_.emplace(n, i);
        }
    }

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    std::optional<std::size_t> index_of(const std::string& name) const
    {
        auto it = index_.find(name);
        if (it == index_.end())
            return std::nullopt;
        return it->second;
    }

    /// One name per line, newline-terminated.
    std::string to_text() const
    {
        std::string out;
        for (const auto& n : names_) {
            out += n;
            out += '\n';
        }
        return out;
    }

    static vocabulary from_text(const std::string& text)
    {
        std::vector<std::string> names;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            names.push_back(line);
        }
        return vocabulary(std::move(names));
    }

    std::string digest() const { return sha256_hex(to_text()); }

    bool operator==(const vocabulary& o) const { return names_ == o.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline vocabulary build_vocabulary(std::span<const feature_set> sets)
{
    std::set<std::string> all;
    for (const auto& s : sets)
        all.insert(s.begin(), s.end());
    return vocabulary(std::vector<std::string>(all.begin(), all.end()));
}

struct feature_vector {
    std::vector<std::uint8_t> bits;

    std::size_t size() const noexcept { return bits.size(); }
    bool operator==(const feature_vector&) const = default;
};

/// bits[i] == 1 iff vocab.names()[i] is in `features`; unknown names are ignored.
inline feature_vector vectorize(const feature_set& features, const vocabulary& vocab)
{
    feature_vector fv;
    fv.bits.assign(vocab.size(), 0);
    for (const auto& name : features)
        if (auto idx = vocab.index_of(name))
            fv.bits[*idx] = 1;
    return fv;
}

/// Sparse on-disk form:
///   MFOXFV 1 <vocab-hash> <length>
///   <sample-id> <set index> <set index> ...
struct feature_file {
    std::string vocab_hash;
    std::size_t length = 0;
    std::vector<std::pair<std::string, feature_vector>> rows;

    std::string to_text() const
    {
        std::ostringstream os;
        os << "MFOXFV 1 " << vocab_hash << ' ' << length << '\n';
        for (const auto& [id, fv] : rows) {
            if (fv.size() != length)
                throw error(errc::vocab_mismatch, "row '" + id + "' has length " + std::to_string(fv.size()));
            os << id;
            for (std::size_t i = 0; i < fv.bits.size(); ++i)
                if (fv.bits[i])
                    os << ' ' << i;
            os << '\n';
        }
        return os.str();
    }

    static feature_file from_text(const std::string& text)
    {
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line))
            throw error(errc::format_error, "empty feature file");
        feature_file f;
        {
            std::istringstream hs(line);
            std::string magic;
            int version = 0;
            if (!(hs >> magic >> version >> f.vocab_hash >> f.length) || magic != "MFOXFV" || version != 1)
                throw error(errc::format_error, "bad feature file header");
        }
        int line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty())
                continue;
            std::istringstream ls(line);
            std::string id;
            ls >> id;
            feature_vector fv;
            fv.bits.assign(f.length, 0);
            std::size_t idx = 0;
            while (ls >> idx) {
                if (idx >= f.length)
                    throw error(errc::format_error, "line " + std::to_string(line_no) + ": index out of range");
                fv.bits[idx] = 1;
            }
            if (!ls.eof())
                throw error(errc::format_error, "line " + std::to_string(line_no) + ": bad index");
            f.rows.emplace_back(std::move(id), std::move(fv));
        }
        return f;
    }
};

} // namespace malfox::pe

#endif // MALFOX_PE_PARSER_HPP
