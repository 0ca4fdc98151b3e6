#include <malfox/fixtures.hpp>
#include <malfox/pe_model.hpp>
#include <malfox/pe_parser.hpp>

#include <support/import_oracle.hpp>

#include <gtest/gtest.h>

using namespace malfox;

namespace {

pe::fixture_spec kernel32_exit()
{
    pe::fixture_spec s;
    s.imports = {{"kernel32.dll", {"ExitProcess"}, {}, false}};
    return s;
}

errc parse_error(const byte_vector& b)
{
    try {
        pe::parse_pe(b);
    } catch (const error& e) {
        return e.code();
    }
    ADD_FAILURE() << "parse succeeded";
    return errc::io_error;
}

} // namespace

TEST(Synthesize, DefaultHasTwoSections)
{
    const pe::fixture_spec spec;
    const auto img = pe::parse_pe(pe::synthesize_min_pe(spec));
    EXPECT_EQ(img.file.number_of_sections, spec.section_count);
    EXPECT_EQ(img.sections.size(), 2u);
    EXPECT_EQ(img.optional.file_alignment, spec.file_alignment);
    EXPECT_EQ(img.optional.section_alignment, spec.section_alignment);
    EXPECT_EQ(img.optional.image_base, spec.image_base);
    EXPECT_TRUE(img.is_pe32());
}

TEST(Synthesize, SameSpecSameBytes)
{
    auto spec = kernel32_exit();
    spec.seed = 42;
    spec.code_randomness = 0.5;
    spec.overlay_size = 100;
    EXPECT_EQ(pe::synthesize_min_pe(spec), pe::synthesize_min_pe(spec));
    auto other = spec;
    other.seed = 43;
    EXPECT_NE(pe::synthesize_min_pe(spec), pe::synthesize_min_pe(other));
}

TEST(Synthesize, OneImportEntry)
{
    const auto img = pe::parse_pe(pe::synthesize_min_pe(kernel32_exit()));
    const auto imports = pe::walk_imports(img);
    ASSERT_EQ(imports.size(), 1u);
    EXPECT_EQ(imports[0].dll_name, "kernel32.dll");
}

TEST(Synthesize, RejectsBadSpecs)
{
    pe::fixture_spec s;
    s.file_alignment = 0x300;
    EXPECT_THROW(pe::synthesize_min_pe(s), error);
    s = {};
    s.section_count = 1;
    EXPECT_THROW(pe::synthesize_min_pe(s), error);
    s = {};
    s.data_strings = {"x"};
    EXPECT_THROW(pe::synthesize_min_pe(s), error);
    s = {};
    s.section_alignment = 0x100;
    EXPECT_THROW(pe::synthesize_min_pe(s), error);
}

TEST(Synthesize, FromKv)
{
    const auto doc = kv_document::parse("file_alignment = 1024\nsections = 3\n"
                                        "import = KERNEL32.dll: ExitProcess, #7\n"
                                        "iat_import = user32.dll: MessageBoxA\n"
                                        "data = Hello World\n");
    const auto spec = pe::fixture_spec::from_kv(doc);
    EXPECT_EQ(spec.file_alignment, 1024u);
    ASSERT_EQ(spec.imports.size(), 2u);
    EXPECT_EQ(spec.imports[0].functions, std::vector<std::string>{"ExitProcess"});
    EXPECT_EQ(spec.imports[0].ordinals, std::vector<std::uint16_t>{7});
    EXPECT_TRUE(spec.imports[1].iat_only);
    const auto bytes = pe::synthesize_min_pe(spec);
    const auto walked = oracle::hex_walk(bytes).imports();
    ASSERT_EQ(walked.size(), 2u);
    EXPECT_EQ(walked[0].ordinals, 1u);
    EXPECT_EQ(walked[1].names, std::vector<std::string>{"messageboxa"});
}

TEST(Parse, TruncatedBelowDosHeader)
{
    EXPECT_EQ(parse_error(byte_vector(63, 0)), errc::truncated);
}

TEST(Parse, BadMagic)
{
    auto b = pe::synthesize_min_pe({});
    b[0] = 'Z';
    b[1] = 'M';
    EXPECT_EQ(parse_error(b), errc::bad_magic);
}

TEST(Parse, BadNtSignature)
{
    auto b = pe::synthesize_min_pe({});
    const auto nt = load_le32(b, 0x3C);
    b[nt] = 'X';
    EXPECT_EQ(parse_error(b), errc::bad_magic);
}

TEST(Parse, ErrorNamesOffset)
{
    auto b = pe::synthesize_min_pe({});
    b.resize(b.size() - 10);
    try {
        pe::parse_pe(b);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::truncated);
        ASSERT_TRUE(e.offset().has_value());
        EXPECT_NE(std::string(e.what()).find("Truncated at offset 0x"), std::string::npos);
    }
}

TEST(Parse, RejectsMisalignedSection)
{
    auto b = pe::synthesize_min_pe({});
    const auto img = pe::parse_pe(b);
    const std::size_t ptr = img.section_table_offset() + 20;
    store_le32(std::span<std::uint8_t>(b), ptr, img.sections[0].header.pointer_to_raw_data + 1);
    EXPECT_EQ(parse_error(b), errc::malformed_header);
}

TEST(Parse, RejectsZeroSections)
{
    auto b = pe::synthesize_min_pe({});
    const auto nt = load_le32(b, 0x3C);
    store_le16(std::span<std::uint8_t>(b), nt + 6, 0);
    EXPECT_EQ(parse_error(b), errc::malformed_header);
}

TEST(Parse, RejectsSmallFileAlignment)
{
    auto b = pe::synthesize_min_pe({});
    const auto nt = load_le32(b, 0x3C);
    store_le32(std::span<std::uint8_t>(b), nt + 24 + 36, 256);
    EXPECT_EQ(parse_error(b), errc::malformed_header);
}

TEST(RoundTrip, Fixtures)
{
    for (std::uint32_t fa : {0x200u, 0x400u, 0x1000u}) {
        for (std::uint32_t sections : {2u, 3u, 5u}) {
            pe::fixture_spec s = kernel32_exit();
            s.file_alignment = fa;
            s.section_alignment = std::max(0x1000u, fa);
            s.section_count = sections;
            s.overlay_size = sections * 7;
            s.code_randomness = 0.3;
            s.seed = fa + sections;
            const auto b = pe::synthesize_min_pe(s);
            const auto img = pe::parse_pe(b);
            EXPECT_EQ(pe::serialize_pe(img), b);
            EXPECT_EQ(img.overlay.size(), s.overlay_size);
            EXPECT_EQ(pe::parse_pe(pe::serialize_pe(img)), img);
        }
    }
}

TEST(RoundTrip, PreservesUnusualLayout)
{
    // Gap bytes between sections and a non-zero header tail survive.
    auto img = pe::parse_pe(pe::synthesize_min_pe(kernel32_exit()));
    const auto fa = img.optional.file_alignment;
    img.sections[1].gap_before.assign(fa, 0xAB);
    img.sections[1].header.pointer_to_raw_data += fa;
    img.header_padding.back() = 0x5A;
    const auto b = pe::serialize_pe(img);
    const auto back = pe::parse_pe(b);
    EXPECT_EQ(back, img);
    EXPECT_EQ(pe::serialize_pe(back), b);
}

TEST(RoundTrip, ProgrammaticImage)
{
    pe::pe_image img;
    img.dos_stub.assign(16, 0xCC);
    img.dos.e_lfanew = 64 + 16;
    img.file.number_of_sections = 1;
    auto& opt = img.optional;
    opt.file_alignment = 0x200;
    opt.section_alignment = 0x1000;
    opt.size_of_headers = 0x200;
    opt.size_of_image = 0x2000;
    opt.entry_point_rva = 0x1000;
    opt.raw.assign(pe::optional_header_size_pe32, 0);
    pe::section s;
    s.header.name = pe::make_section_name(".text");
    s.header.virtual_address = 0x1000;
    s.header.virtual_size = 3;
    s.header.size_of_raw_data = 0x200;
    s.header.pointer_to_raw_data = 0x200;
    s.header.characteristics = pe::scn::cnt_code | pe::scn::mem_execute;
    s.data.assign(0x200, 0x90);
    img.sections.push_back(s);
    img.header_padding.assign(0x200 - img.section_table_end(), 0);
    const auto bytes = pe::serialize_pe(img);
    EXPECT_EQ(bytes.size(), 0x400u);
    auto back = pe::parse_pe(bytes);
    // Parsing fills raw with the decoded fields; compare through a second round trip.
    EXPECT_EQ(pe::serialize_pe(back), bytes);
    EXPECT_EQ(back.sections, img.sections);
    EXPECT_EQ(back.optional.entry_point_rva, 0x1000u);
}

TEST(Serialize, SectionCountMismatch)
{
    auto img = pe::parse_pe(pe::synthesize_min_pe({}));
    img.file.number_of_sections = 3;
    try {
        pe::serialize_pe(img);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::invariant_violation);
    }
}

TEST(Serialize, DataLengthMismatch)
{
    auto img = pe::parse_pe(pe::synthesize_min_pe({}));
    img.sections[0].data.pop_back();
    EXPECT_THROW(pe::serialize_pe(img), error);
}

TEST(Model, FindCodeSection)
{
    auto img = pe::parse_pe(pe::synthesize_min_pe({}));
    ASSERT_NE(pe::find_code_section(img), nullptr);
    EXPECT_EQ(pe::find_code_section(img)->header.name_string(), ".text");
    img.sections[0].header.characteristics = pe::scn::mem_read;
    EXPECT_EQ(pe::find_code_section(img), nullptr);
}
