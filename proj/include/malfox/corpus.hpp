#ifndef MALFOX_CORPUS_HPP
#define MALFOX_CORPUS_HPP

// Seeded toy corpus: import-bearing PE32 samples labelled malicious or benign,
// plus the stub, host and DLL images the editor needs.

#include <malfox/bytes.hpp>
#include <malfox/error.hpp>
#include <malfox/fixtures.hpp>
#include <malfox/pe_editor.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace malfox::corpus {

struct api_group {
    std::string dll;
    std::vector<std::string> functions;
};

/// Imports common to most programs.
inline const std::vector<api_group>& common_apis()
{
    static const std::vector<api_group> g = {
        {"kernel32.dll",
         {"GetModuleHandleA", "GetProcAddress", "LoadLibraryA", "ExitProcess", "GetLastError", "CloseHandle",
          "CreateFileA", "ReadFile", "WriteFile", "GetCommandLineA", "HeapAlloc", "Sleep"}},
        {"msvcrt.dll", {"printf", "malloc", "free", "memcpy", "strlen", "exit"}},
    };
    return g;
}

/// Imports typical of desktop applications.
inline const std::vector<api_group>& benign_apis()
{
    static const std::vector<api_group> g = {
        {"user32.dll",
         {"MessageBoxA", "CreateWindowExA", "ShowWindow", "GetMessageA", "DispatchMessageA", "DefWindowProcA",
          "RegisterClassA"}},
        {"gdi32.dll", {"BitBlt", "SelectObject", "CreateFontA", "TextOutA"}},
        {"shell32.dll", {"SHGetFolderPathA", "DragQueryFileA"}},
    };
    return g;
}

/// Imports typical of injectors, persistence and network implants.
inline const std::vector<api_group>& suspicious_apis()
{
    static const std::vector<api_group> g = {
        {"kernel32.dll",
         {"CreateRemoteThread", "VirtualAllocEx", "WriteProcessMemory", "OpenProcess", "CreateToolhelp32Snapshot",
          "Process32First", "Process32Next", "IsDebuggerPresent", "VirtualProtect", "GetThreadContext",
          "SetThreadContext", "ResumeThread"}},
        {"advapi32.dll", {"RegSetValueExA", "RegOpenKeyExA", "RegCreateKeyExA", "OpenProcessToken", "AdjustTokenPrivileges"}},
        {"ws2_32.dll", {"connect", "socket", "send", "recv", "WSAStartup"}},
        {"wininet.dll", {"InternetOpenA", "InternetOpenUrlA", "InternetReadFile"}},
    };
    return g;
}

struct sample {
    std::string id;
    byte_vector bytes;
    bool malicious = false;
};

struct corpus_config {
    std::size_t malicious = 120;
    std::size_t benign = 80;
    std::size_t obfusmal_stubs = 2;
    std::size_t stealmal_hosts = 2;
    std::size_t hollowmal_hosts = 1;
    std::size_t hollowmal_dlls = 2;
    std::uint64_t seed = 7;
};

struct synthetic_corpus {
    std::vector<sample> samples; // malicious first, then benign
    editor::stub_registry registry;
};

namespace detail {

/// Merge picks into per-DLL import specs, keeping DLL first-seen order.
inline void add_import(std::vector<pe::import_spec>& imports, const std::string& dll, const std::string& fn)
{
    auto it = std::find_if(imports.begin(), imports.end(), [&](const pe::import_spec& s) { return s.dll == dll; });
    if (it == imports.end()) {
        imports.push_back({dll, {}, {}, false});
        it = imports.end() - 1;
    }
    if (std::find(it->functions.begin(), it->functions.end(), fn) == it->functions.end())
        it->functions.push_back(fn);
}

/// Each function of each group is taken independently with probability p.
inline void pick(std::vector<pe::import_spec>& imports, const std::vector<api_group>& groups, double p,
                 std::mt19937_64& rng)
{
    std::bernoulli_distribution take(p);
    for (const auto& g : groups)
        for (const auto& fn : g.functions)
            if (take(rng))
                add_import(imports, g.dll, fn);
}

inline pe::fixture_spec base_spec(std::uint64_t seed)
{
    pe::fixture_spec spec;
    spec.seed = seed;
    spec.section_count = 3;
    spec.data_strings = {"synthetic sample"};
    return spec;
}

} // namespace detail

/// A malicious sample: common imports plus several suspicious ones, and code
/// that is mostly random bytes (packed-looking).
inline byte_vector make_malicious(std::mt19937_64& rng)
{
    auto spec = detail::base_spec(rng());
    detail::pick(spec.imports, common_apis(), 0.35, rng);
    detail::pick(spec.imports, suspicious_apis(), 0.3, rng);
    detail::pick(spec.imports, benign_apis(), 0.05, rng);
    // Guarantee a recognisable core.
    const auto& k = suspicious_apis()[0].functions;
    detail::add_import(spec.imports, "kernel32.dll", k[rng() % k.size()]);
    spec.code_size = 0x200 * static_cast<std::uint32_t>(2 + rng() % 3);
    spec.code_randomness = std::uniform_real_distribution<double>(0.3, 1.0)(rng);
    spec.overlay_size = static_cast<std::uint32_t>(rng() % 2 ? 0 : 64);
    return pe::synthesize_min_pe(spec);
}

/// A benign sample: common and GUI imports, patterned code.
inline byte_vector make_benign(std::mt19937_64& rng)
{
    auto spec = detail::base_spec(rng());
    detail::pick(spec.imports, common_apis(), 0.35, rng);
    detail::pick(spec.imports, benign_apis(), 0.35, rng);
    detail::pick(spec.imports, suspicious_apis(), 0.03, rng);
    detail::add_import(spec.imports, "kernel32.dll", "ExitProcess");
    spec.code_size = 0x200 * static_cast<std::uint32_t>(1 + rng() % 3);
    spec.code_randomness = std::uniform_real_distribution<double>(0.0, 0.25)(rng);
    return pe::synthesize_min_pe(spec);
}

/// Console "Hello World": prints a string and exits.
inline byte_vector make_hello_world(std::uint64_t seed)
{
    auto spec = detail::base_spec(seed);
    spec.imports = {{"kernel32.dll", {"ExitProcess"}, {}, false}, {"msvcrt.dll", {"printf"}, {}, false}};
    spec.data_strings = {"Hello World"};
    return pe::synthesize_min_pe(spec);
}

/// Host for Stealmal: imports the process-hollowing API set.
inline byte_vector make_stealmal_host(std::uint64_t seed)
{
    auto spec = detail::base_spec(seed);
    spec.imports = {{"kernel32.dll",
                     {"CreateProcessA", "VirtualAllocEx", "WriteProcessMemory", "GetThreadContext", "SetThreadContext",
                      "ResumeThread", "ExitProcess"},
                     {},
                     false}};
    return pe::synthesize_min_pe(spec);
}

/// A small DLL used as Obfusmal decryptor stub or Hollowmal loader.
inline byte_vector make_stub_dll(std::uint64_t seed)
{
    pe::fixture_spec spec;
    spec.seed = seed;
    spec.dll = true;
    spec.image_base = 0x10000000;
    spec.imports = {{"kernel32.dll", {"VirtualProtect", "GetModuleHandleA"}, {}, false}};
    return pe::synthesize_min_pe(spec);
}

inline synthetic_corpus make_synthetic_corpus(const corpus_config& cfg)
{
    if (cfg.obfusmal_stubs == 0 || cfg.stealmal_hosts == 0 || cfg.hollowmal_hosts == 0 || cfg.hollowmal_dlls == 0)
        throw error(errc::empty_registry, "every perturbation method needs at least one instance");
    std::mt19937_64 rng(cfg.seed);
    synthetic_corpus c;
    for (std::size_t i = 0; i < cfg.malicious; ++i)
        c.samples.push_back({"mal" + std::to_string(i), make_malicious(rng), true});
    for (std::size_t i = 0; i < cfg.benign; ++i)
        c.samples.push_back({"ben" + std::to_string(i), make_benign(rng), false});
    for (std::size_t i = 0; i < cfg.obfusmal_stubs; ++i)
        c.registry.obfusmal_stubs.push_back(make_stub_dll(rng()));
    for (std::size_t i = 0; i < cfg.stealmal_hosts; ++i)
        c.registry.stealmal_hosts.push_back(make_stealmal_host(rng()));
    for (std::size_t i = 0; i < cfg.hollowmal_hosts; ++i)
        c.registry.hollowmal_hosts.push_back(make_hello_world(rng()));
    for (std::size_t i = 0; i < cfg.hollowmal_dlls; ++i)
        c.registry.hollowmal_dlls.push_back(make_stub_dll(rng()));
    return c;
}

} // namespace malfox::corpus

#endif // MALFOX_CORPUS_HPP
