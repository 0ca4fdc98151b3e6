#ifndef MALFOX_TESTS_FIXTURE_SPECS_HPP
#define MALFOX_TESTS_FIXTURE_SPECS_HPP

#include <malfox/fixtures.hpp>

#include <vector>

namespace oracle {

/// Fixtures covering several alignments, multiple descriptors, ordinal thunks,
/// an IAT-only descriptor, a DLL and an overlay.
inline std::vector<malfox::pe::fixture_spec> import_fixtures()
{
    using malfox::pe::fixture_spec;
    std::vector<fixture_spec> out;
    fixture_spec a;
    a.imports = {{"kernel32.dll", {"ExitProcess"}, {}, false}};
    out.push_back(a);

    fixture_spec b;
    b.file_alignment = 0x400;
    b.section_alignment = 0x2000;
    b.imports = {{"KERNEL32.DLL", {"CreateFileA", "ReadFile"}, {}, false},
                 {"user32.dll", {"MessageBoxA"}, {3, 9}, false},
                 {"ws2_32.dll", {}, {1}, false}};
    out.push_back(b);

    fixture_spec c;
    c.file_alignment = 0x1000;
    c.section_alignment = 0x1000;
    c.section_count = 4;
    c.data_strings = {"abc"};
    c.imports = {{"advapi32.dll", {"RegOpenKeyExA", "RegSetValueExA"}, {}, true},
                 {"msvcrt.dll", {"printf", "malloc", "free"}, {}, false}};
    out.push_back(c);

    fixture_spec d;
    d.file_alignment = 0x200;
    d.section_alignment = 0x200;
    d.code_size = 0x333;
    d.imports = {{"a.dll", {"F1"}, {}, false}, {"b.dll", {"F1", "F2"}, {}, false}, {"a.dll", {"F3"}, {0x7FFF}, false}};
    out.push_back(d);

    fixture_spec e;
    e.dll = true;
    e.image_base = 0x10000000;
    e.overlay_size = 300;
    e.imports = {{"kernel32.dll", {"VirtualProtect", "GetModuleHandleA", "LoadLibraryA", "GetProcAddress"}, {}, false}};
    out.push_back(e);

    fixture_spec f;
    f.file_alignment = 0x800;
    f.section_alignment = 0x1000;
    f.section_count = 5;
    f.spare_header_slots = 1;
    f.code_randomness = 0.9;
    f.seed = 17;
    f.imports = {{"wininet.dll", {"InternetOpenA"}, {2, 4, 8}, false},
                 {"shell32.dll", {"ShellExecuteA"}, {}, true},
                 {"kernel32.dll", {"Sleep", "GetTickCount"}, {}, false}};
    out.push_back(f);
    return out;
}

} // namespace oracle

#endif // MALFOX_TESTS_FIXTURE_SPECS_HPP
