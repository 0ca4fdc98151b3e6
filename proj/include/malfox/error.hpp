#ifndef MALFOX_ERROR_HPP
#define MALFOX_ERROR_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace malfox {

/// Failure categories shared by every module.
enum class errc {
    bad_magic,
    truncated,
    malformed_header,
    invariant_violation,
    spec_too_large,
    unmapped_rva,
    cyclic_or_overlong,
    not_pe32,
    too_many_sections,
    no_header_space,
    no_code_section,
    empty_registry,
    shape_mismatch,
    config_invalid,
    domain_error,
    division_by_zero,
    undefined_for_undetected,
    detector_unavailable,
    vocab_mismatch,
    empty_dataset,
    format_error,
    io_error,
};

constexpr std::string_view to_string(errc code) noexcept
{
    switch (code) {
    case errc::bad_magic: return "BadMagic";
    case errc::truncated: return "Truncated";
    case errc::malformed_header: return "MalformedHeader";
    case errc::invariant_violation: return "InvariantViolation";
    case errc::spec_too_large: return "SpecTooLarge";
    case errc::unmapped_rva: return "UnmappedRva";
    case errc::cyclic_or_overlong: return "CyclicOrOverlong";
    case errc::not_pe32: return "NotPe32";
    case errc::too_many_sections: return "TooManySections";
    case errc::no_header_space: return "NoHeaderSpace";
    case errc::no_code_section: return "NoCodeSection";
    case errc::empty_registry: return "EmptyRegistry";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::config_invalid: return "ConfigInvalid";
    case errc::domain_error: return "DomainError";
    case errc::division_by_zero: return "DivisionByZero";
    case errc::undefined_for_undetected: return "UndefinedForUndetected";
    case errc::detector_unavailable: return "DetectorUnavailable";
    case errc::vocab_mismatch: return "VocabMismatch";
    case errc::empty_dataset: return "EmptyDataset";
    case errc::format_error: return "FormatError";
    case errc::io_error: return "IoError";
    }
    return "Unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    /// Errors tied to a position in a binary name that file offset.
    error(errc code, const std::string& what, std::uint64_t offset)
        : std::runtime_error(std::string(to_string(code)) + " at offset 0x" + hex(offset) + ": " + what),
          code_(code), offset_(offset)
    {
    }

    errc code() const noexcept { return code_; }
    std::optional<std::uint64_t> offset() const noexcept { return offset_; }

private:
    static std::string hex(std::uint64_t v)
    {
        static constexpr char digits[] = "0123456789abcdef";
        std::string s;
        do {
            s.insert(s.begin(), digits[v & 0xF]);
            v >>= 4;
        } while (v != 0);
        return s;
    }

    errc code_;
    std::optional<std::uint64_t> offset_;
};

} // namespace malfox

#endif // MALFOX_ERROR_HPP
