// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <malfox/corpus.hpp>
#include <malfox/detector.hpp>
#include <malfox/fixtures.hpp>
#include <malfox/nn/checkpoint.hpp>
#include <malfox/nn/loss.hpp>
#include <malfox/nn/models.hpp>
#include <malfox/pe_editor.hpp>
#include <malfox/pe_parser.hpp>
#include <malfox/trainer.hpp>

#include <malfox_cli.hpp>

#include <support/fixture_specs.hpp>
#include <support/gradcheck.hpp>
#include <support/import_oracle.hpp>
#include <support/layer_cases.hpp>

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

using namespace malfox;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0)
{
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct result {
    bool pass = true;
    std::string detail;
};

/// Collects the first few failure messages of a criterion.
struct checker {
    bool ok = true;
    std::size_t failures = 0;
    std::ostringstream notes;

    void expect(bool cond, const std::string& what)
    {
        if (cond)
            return;
        ok = false;
        if (failures++ < 3)
            notes << (failures > 1 ? "; " : "") << what;
    }

    result finish(const std::string& summary) const
    {
        if (ok)
            return {true, summary};
        return {false, summary + " | " + notes.str() + (failures > 3 ? " (+" + std::to_string(failures - 3) + " more)" : "")};
    }
};

std::string fmt(double v, int precision = 4)
{
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

// ---------------------------------------------------------------- 1

result parser_correctness()
{
    checker c;
    const auto t0 = clock_type::now();
    const auto specs = oracle::import_fixtures();
    std::size_t descriptors = 0, ordinals = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto bytes = pe::synthesize_min_pe(specs[i]);
        const auto img = pe::parse_pe(bytes);
        const oracle::hex_walk walk(bytes);
        c.expect(pe::extract_features(img) == walk.features(), "fixture " + std::to_string(i) + " features differ");
        c.expect(pe::serialize_pe(img) == bytes, "fixture " + std::to_string(i) + " round trip differs");
        for (const auto& d : walk.imports()) {
            ++descriptors;
            ordinals += d.ordinals;
        }
    }
    const double secs = seconds_since(t0);
    c.expect(specs.size() >= 5, "fewer than 5 fixtures");
    c.expect(ordinals > 0, "no ordinal thunks exercised");
    c.expect(secs < 1.0, "took " + fmt(secs) + " s");
    return c.finish(std::to_string(specs.size()) + " fixtures, " + std::to_string(descriptors) + " descriptors, " +
                    std::to_string(ordinals) + " ordinal thunks, " + fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------- 2

result rva_mapping()
{
    checker c;
    std::mt19937_64 rng(2024);
    auto draw = [&](std::uint32_t lo, std::uint32_t hi) {
        return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
    };
    std::size_t mapped = 0, rejected = 0;
    for (int layout = 0; layout < 1000; ++layout) {
        const std::uint32_t fa = 0x200u << draw(0, 3);
        const std::uint32_t sa = std::max<std::uint32_t>(fa, 0x1000u << draw(0, 1));
        const auto count = draw(1, 6);
        std::vector<pe::section_header> hs;
        std::uint32_t va = sa, raw = fa;
        for (std::uint32_t k = 0; k < count; ++k) {
            pe::section_header h;
            h.virtual_address = va;
            h.virtual_size = draw(1, 3 * fa);
            h.size_of_raw_data = draw(0, 1) ? align_up(h.virtual_size, fa) : fa * draw(0, 2);
            h.pointer_to_raw_data = raw;
            const auto extent = std::max(h.virtual_size, h.size_of_raw_data);
            va = align_up(va + extent, sa) + sa * draw(0, 1);
            raw += h.size_of_raw_data;
            hs.push_back(h);
        }
        for (const auto& h : hs) {
            const auto extent = std::max(h.virtual_size, h.size_of_raw_data);
            for (std::uint32_t off = 0; off < extent; ++off) {
                const auto rva = h.virtual_address + off;
                std::uint32_t foa = 0;
                try {
                    foa = pe::rva_to_foa(rva, hs);
                } catch (const error&) {
                    c.expect(false, "in-section RVA rejected");
                    continue;
                }
                ++mapped;
                c.expect(foa == rva - h.virtual_address + h.pointer_to_raw_data, "FOA formula mismatch");
                if (off < h.size_of_raw_data)
                    c.expect(pe::foa_to_rva(foa, hs) == rva, "inverse is not the identity");
                else
                    c.expect(foa - h.pointer_to_raw_data + h.virtual_address == rva, "inverse substitution");
            }
        }
        // Gaps between sections, below the first and beyond the last.
        std::vector<std::uint32_t> outside = {0, hs.front().virtual_address - 1, va + draw(0, 0x10000)};
        for (std::size_t k = 0; k + 1 < hs.size(); ++k) {
            const auto end = hs[k].virtual_address + std::max(hs[k].virtual_size, hs[k].size_of_raw_data);
            if (end < hs[k + 1].virtual_address) {
                outside.push_back(end);
                outside.push_back(hs[k + 1].virtual_address - 1);
            }
        }
        for (auto rva : outside) {
            bool unmapped = false;
            try {
                pe::rva_to_foa(rva, hs);
            } catch (const error& e) {
                unmapped = e.code() == errc::unmapped_rva;
            }
            c.expect(unmapped, "out-of-section RVA mapped");
            ++rejected;
        }
    }
    return c.finish("1000 layouts, " + std::to_string(mapped) + " in-section RVAs, " + std::to_string(rejected) +
                    " out-of-section RVAs rejected");
}

// ---------------------------------------------------------------- 3

byte_vector payload_of(const pe::section& s)
{
    return byte_vector(s.data.begin(), s.data.begin() + s.header.virtual_size);
}

result editor_structure()
{
    checker c;
    auto cc = corpus::corpus_config{};
    const auto data = corpus::make_synthetic_corpus(cc);
    const auto& reg = data.registry;
    const std::uint8_t key = 0x3C;
    std::size_t stages = 0;
    std::mt19937_64 rng(3);
    for (std::size_t sample = 0; sample < 4; ++sample) {
        const auto input = pe::parse_pe(data.samples[sample * 37].bytes);
        for (auto path : editor::all_paths()) {
            if (path.to_string() == "000")
                continue;
            const std::string tag = path.to_string() + " sample " + std::to_string(sample);
            path.noise = train::sample_noise(rng).mapped;
            const auto [out, report] = editor::apply_path(input, path, reg, key);
            const auto bytes = pe::serialize_pe(out);
            pe::pe_image back;
            try {
                back = pe::parse_pe(bytes);
                c.expect(pe::serialize_pe(back) == bytes, tag + ": re-serialization differs");
            } catch (const error& e) {
                c.expect(false, tag + ": output does not parse: " + e.what());
                continue;
            }
            std::size_t want_added = 0;
            for (auto m : editor::method_order)
                if (path.uses(m))
                    want_added += m == editor::method::hollowmal ? 2 : 1;
            c.expect(report.sections_added == want_added, tag + ": sections_added");

            // Replay stage by stage with the instances the editor picked.
            auto cur = input;
            for (const auto& [m, idx] : report.applied) {
                ++stages;
                const auto cur_bytes = pe::serialize_pe(cur);
                pe::pe_image next;
                if (m == editor::method::obfusmal) {
                    const auto& stub = reg.obfusmal_stubs[idx];
                    next = editor::obfusmal(cur, stub, key);
                    c.expect(next.sections.size() == cur.sections.size() + 1, tag + ": obfusmal delta");
                    c.expect(next.optional.entry_point_rva ==
                                 pe::parse_pe(stub).optional.entry_point_rva + cur.optional.size_of_image,
                             tag + ": obfusmal OEP");
                    const auto* code = pe::find_code_section(cur);
                    const auto at = static_cast<std::size_t>(code - cur.sections.data());
                    c.expect(editor::xor_transform(next.sections[at].data, key) == code->data,
                             tag + ": obfusmal code does not decrypt");
                } else if (m == editor::method::stealmal) {
                    const auto& host = reg.stealmal_hosts[idx];
                    next = editor::stealmal(cur, host, key);
                    c.expect(next.sections.size() == pe::parse_pe(host).sections.size() + 1, tag + ": stealmal delta");
                    c.expect(editor::xor_transform(payload_of(next.sections.back()), key) == cur_bytes,
                             tag + ": stealmal payload does not decrypt");
                } else {
                    const auto hosts = reg.hollowmal_hosts.size();
                    const auto& host = reg.hollowmal_hosts[idx / reg.hollowmal_dlls.size() % hosts];
                    const auto& dll = reg.hollowmal_dlls[idx % reg.hollowmal_dlls.size()];
                    next = editor::hollowmal(cur, host, dll, key);
                    c.expect(next.sections.size() == pe::parse_pe(host).sections.size() + 2, tag + ": hollowmal delta");
                    c.expect(editor::xor_transform(payload_of(next.sections[next.sections.size() - 2]), key) ==
                                 cur_bytes,
                             tag + ": hollowmal payload does not decrypt");
                }
                cur = next;
            }
            c.expect(pe::serialize_pe(cur) == bytes, tag + ": replay differs from apply_path");
        }
    }
    return c.finish("7 paths x 4 samples, " + std::to_string(stages) + " stages replayed");
}

// ---------------------------------------------------------------- 4

result gradient_suite()
{
    checker c;
    constexpr int instances = 20;
    constexpr double tolerance = 1e-3;
    double worst = 0;
    std::size_t checks = 0;
    for (const auto& lc : gradcheck::layer_cases()) {
        for (double e : gradcheck::run_case(lc, instances)) {
            ++checks;
            worst = std::max(worst, e);
            c.expect(e < tolerance, lc.name + " error " + fmt(e));
        }
    }
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> p(0.05, 0.95);
    for (int trial = 0; trial < instances; ++trial) {
        std::vector<double> d(3 + trial % 4), b(2 + trial % 3), m(1 + trial % 5);
        for (auto* v : {&d, &b, &m})
            for (auto& x : *v)
                x = p(rng);
        const double eg = gradcheck::relative_error(
            nn::loss_generator_grad(d),
            gradcheck::numeric_gradient([](const std::vector<double>& v) { return nn::loss_generator(v); }, d));
        const auto g = nn::loss_discriminator_grad(b, m);
        const double eb = gradcheck::relative_error(
            g.benign, gradcheck::numeric_gradient(
                          [&](const std::vector<double>& v) { return nn::loss_discriminator(v, m); }, b));
        const double em = gradcheck::relative_error(
            g.malware, gradcheck::numeric_gradient(
                           [&](const std::vector<double>& v) { return nn::loss_discriminator(b, v); }, m));
        for (double e : {eg, std::max(eb, em)}) {
            ++checks;
            worst = std::max(worst, e);
            c.expect(e < tolerance, "loss gradient error " + fmt(e));
        }
    }
    return c.finish(std::to_string(gradcheck::layer_cases().size()) + " layer kinds + 2 losses, " +
                    std::to_string(checks) + " instances, worst relative error " + fmt(worst, 3));
}

// ---------------------------------------------------------------- 5

result loss_closed_forms()
{
    checker c;
    const std::vector<double> zeros(8, 0.0), ones(8, 1.0), half(8, 0.5);
    const double perfect = nn::loss_discriminator(zeros, ones);
    const double uniform = nn::loss_discriminator(half, half);
    const double lg = nn::loss_generator(half);
    c.expect(perfect == 0.0, "L_D perfect = " + fmt(perfect, 17));
    c.expect(std::abs(uniform - 2 * std::log(2.0)) <= 1e-9, "L_D uniform = " + fmt(uniform, 17));
    c.expect(std::abs(lg - std::log(0.5)) <= 1e-9, "L_G = " + fmt(lg, 17));
    return c.finish("L_D(perfect)=" + fmt(perfect, 10) + ", L_D(0.5)=" + fmt(uniform, 12) +
                    ", L_G(0.5)=" + fmt(lg, 12));
}

// ---------------------------------------------------------------- 6

bool rejects(const std::function<void()>& f)
{
    try {
        f();
    } catch (const error& e) {
        return e.code() == errc::config_invalid;
    }
    return false;
}

result shape_arithmetic()
{
    checker c;
    const auto g = nn::generator_config::paper();
    const auto d = nn::discriminator_config::paper();
    c.expect(8 * 13 * 12 == 1248 && g.conv1a * g.conv1b * g.conv1c == 1248 && g.ne2 == 1248, "generator reshape");
    c.expect(143 * 113 == 16159 && d.n_step * d.n_input == 16159 && d.m + d.z == 16159, "discriminator grid");
    try {
        c.expect(nn::plan_generator(g).output_shape() == nn::shape_t{3}, "generator output");
        c.expect(nn::plan_discriminator(d).output_shape() == nn::shape_t{2}, "discriminator output");
    } catch (const error& e) {
        c.expect(false, std::string("paper config rejected: ") + e.what());
    }
    std::size_t rejected = 0;
    auto expect_reject = [&](const std::string& what, const std::function<void()>& f) {
        const bool r = rejects(f);
        c.expect(r, what + " accepted");
        rejected += r;
    };
    for (int field = 0; field < 4; ++field) {
        auto bad = g;
        (field == 0 ? bad.conv1a : field == 1 ? bad.conv1b : field == 2 ? bad.conv1c : bad.ne2) += 1;
        expect_reject("generator field " + std::to_string(field), [&] { nn::build_generator(bad, 1); });
    }
    {
        auto bad = g;
        bad.ne3 = 4;
        expect_reject("generator ne3", [&] { nn::build_generator(bad, 1); });
    }
    for (int field = 0; field < 3; ++field) {
        auto bad = d;
        (field == 0 ? bad.n_step : field == 1 ? bad.n_input : bad.m) += 1;
        expect_reject("discriminator field " + std::to_string(field), [&] { nn::build_discriminator(bad, 1); });
    }
    {
        auto bad = d;
        bad.fc3 = 3;
        expect_reject("discriminator fc3", [&] { nn::build_discriminator(bad, 1); });
    }
    return c.finish("8*13*12=1248=ne2, 143*113=16159=m+z, " + std::to_string(rejected) + " violating configs rejected");
}

// ---------------------------------------------------------------- 7

struct experiment {
    corpus::synthetic_corpus data;
    pe::vocabulary vocab;
    std::vector<train::malware_sample> malware;
    std::vector<pe::feature_vector> benign;
    std::vector<detect::labelled_file> files;
};

experiment load_experiment()
{
    experiment e;
    e.data = corpus::make_synthetic_corpus({});
    std::vector<pe::feature_set> sets;
    for (const auto& s : e.data.samples) {
        sets.push_back(pe::extract_features(pe::parse_pe(s.bytes)));
        e.files.push_back({s.bytes, s.malicious});
    }
    e.vocab = pe::build_vocabulary(sets);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        auto fv = pe::vectorize(sets[i], e.vocab);
        if (e.data.samples[i].malicious)
            e.malware.push_back({pe::parse_pe(e.data.samples[i].bytes), std::move(fv)});
        else
            e.benign.push_back(std::move(fv));
    }
    return e;
}

result desk_evasion()
{
    checker c;
    const auto t0 = clock_type::now();
    const auto e = load_experiment();
    const auto ens = detect::sim_ensemble::build({}, e.vocab, e.files);
    const auto m = e.vocab.size();
    train::train_config cfg;
    auto r = train::train(cfg, e.malware, e.benign, nn::build_generator(nn::generator_config::desk(m), 2),
                          nn::build_discriminator(nn::discriminator_config::desk(m), 3), e.data.registry, ens);
    const auto rows = train::evaluate(r.generator, e.malware, e.data.registry, ens, 1);
    const auto s = train::summarize(rows);
    const double secs = seconds_since(t0);
    const double drop = s.original_detection - s.adversarial_detection;
    c.expect(e.data.samples.size() == 200, "corpus size");
    c.expect(m == 64, "vocabulary size " + std::to_string(m));
    c.expect(ens.entity_count() == 5, "entity count");
    c.expect(r.history.epochs.size() <= 200, "epochs");
    c.expect(secs < 600, "took " + fmt(secs) + " s");
    c.expect(drop >= 0.30, "detection drop " + fmt(drop));
    c.expect(s.evasive > 0.30, "evasive rate " + fmt(s.evasive));
    return c.finish("epochs " + std::to_string(r.history.epochs.size()) + ", detection " +
                    fmt(s.original_detection) + " -> " + fmt(s.adversarial_detection) + " (drop " +
                    fmt(100 * drop, 3) + " pp), evasive " + fmt(s.evasive) + ", " + fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------- 8

struct separable_set {
    std::vector<std::vector<double>> rows;
    std::vector<bool> labels;
};

/// Class-conditional bits kept only when a fixed hyperplane agrees with margin.
separable_set make_separable(std::size_t count, std::size_t width, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<double> w(width);
    for (std::size_t j = 0; j < width; ++j)
        w[j] = j % 2 ? 1.0 : -1.0;
    std::bernoulli_distribution coin(0.5);
    separable_set s;
    while (s.rows.size() < count) {
        const bool mal = coin(rng);
        std::vector<double> x(width + 3, 0.0);
        double score = 0;
        for (std::size_t j = 0; j < width; ++j) {
            const double p = (w[j] > 0) == mal ? 0.75 : 0.25;
            x[j] = std::bernoulli_distribution(p)(rng) ? 1.0 : 0.0;
            score += w[j] * x[j];
        }
        if ((score > 0) != mal || std::abs(score) < 3)
            continue;
        s.rows.push_back(std::move(x));
        s.labels.push_back(mal);
    }
    return s;
}

struct capability_run {
    double accuracy = 0;
    byte_vector checkpoint;
};

capability_run train_discriminator_only(const separable_set& data, std::size_t train_n, std::size_t width)
{
    auto d = nn::build_discriminator(nn::discriminator_config::desk(width), 5);
    nn::adam opt({1e-3});
    std::mt19937_64 rng(6);
    std::vector<std::size_t> order(train_n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    constexpr std::size_t batch = 32;
    for (int epoch = 0; epoch < 50; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t at = 0; at < train_n; at += batch) {
            std::vector<std::vector<double>> rows;
            std::vector<bool> labels;
            for (std::size_t k = at; k < std::min(train_n, at + batch); ++k) {
                rows.push_back(data.rows[order[k]]);
                labels.push_back(data.labels[order[k]]);
            }
            if (std::count(labels.begin(), labels.end(), true) == 0 ||
                std::count(labels.begin(), labels.end(), false) == 0)
                continue;
            train::discriminator_step(d, opt, rows, labels, rng);
        }
    }
    const std::vector<std::vector<double>> test_rows(data.rows.begin() + static_cast<std::ptrdiff_t>(train_n),
                                                     data.rows.end());
    const std::vector<bool> test_labels(data.labels.begin() + static_cast<std::ptrdiff_t>(train_n), data.labels.end());
    return {train::discriminator_accuracy(d, test_rows, test_labels), nn::save_checkpoint(d)};
}

result discriminator_capability()
{
    checker c;
    constexpr std::size_t width = 61; // 61 + 3 = 8 x 8
    const auto data = make_separable(500, width, 8);
    const auto a = train_discriminator_only(data, 400, width);
    const auto b = train_discriminator_only(data, 400, width);
    c.expect(a.accuracy >= 0.95, "held-out accuracy " + fmt(a.accuracy));
    c.expect(a.checkpoint == b.checkpoint && a.accuracy == b.accuracy, "runs differ");
    return c.finish("500 samples (400/100), 50 epochs, held-out accuracy " + fmt(a.accuracy) +
                    ", repeat run identical");
}

// ---------------------------------------------------------------- 9

result metric_formulas()
{
    checker c;
    c.expect(detect::evasive_rate(56, 22) == 34.0 / 56.0, "evasive_rate(56,22)");
    c.expect(detect::accuracy(99, 100) == 99.0 / 100.0, "accuracy(99,100)");
    c.expect(detect::detection_rate({{1, 1, 0, 0, 0}}) == 2.0 / 5.0, "detection_rate 2/5");
    c.expect(detect::detection_rate({{0, 0, 0}}) == 0.0 && detect::detection_rate({{1, 1, 1}}) == 1.0,
             "detection_rate bounds");
    auto code_of = [](const std::function<void()>& f) -> std::optional<errc> {
        try {
            f();
        } catch (const error& e) {
            return e.code();
        }
        return std::nullopt;
    };
    c.expect(code_of([] { detect::evasive_rate(0, 0); }) == errc::undefined_for_undetected, "n_orig = 0");
    c.expect(code_of([] { detect::accuracy(0, 0); }) == errc::division_by_zero, "accuracy over 0");
    return c.finish("evasive_rate(56,22)=" + fmt(detect::evasive_rate(56, 22), 17) +
                    ", UndefinedForUndetected at n_orig=0");
}

// ---------------------------------------------------------------- 10

result end_to_end_determinism()
{
    checker c;
    const auto root = fs::temp_directory_path() / ("malfox_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    auto run = [](std::vector<std::string> args) {
        args.insert(args.begin(), "malfox");
        std::vector<const char*> argv;
        for (const auto& a : args)
            argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return std::make_pair(code, err.str());
    };
    const auto corpus_dir = root / "corpus";
    auto s = run({"synth", "--out", corpus_dir.string(), "--seed", "7"});
    c.expect(s.first == 0, "synth failed: " + s.second);
    const auto manifest = (corpus_dir / "run.kv").string();
    auto a = run({"train", manifest, "--seed", "5", "--out", (root / "a").string()});
    auto b = run({"train", manifest, "--seed", "5", "--out", (root / "b").string()});
    c.expect(a.first == 0 && b.first == 0, "train failed: " + a.second + b.second);
    std::size_t compared = 0;
    for (const char* f : {"history.csv", "generator.ckpt", "discriminator.ckpt"}) {
        const auto pa = root / "a" / f, pb = root / "b" / f;
        if (!fs::is_regular_file(pa) || !fs::is_regular_file(pb)) {
            c.expect(false, std::string("missing ") + f);
            continue;
        }
        c.expect(read_file(pa) == read_file(pb), std::string(f) + " differs");
        ++compared;
    }
    fs::remove_all(root);
    return c.finish("two full train runs (seed 5), " + std::to_string(compared) +
                    " artefacts byte-identical");
}

} // namespace

int main()
{
    struct criterion {
        int id;
        const char* name;
        result (*run)();
    };
    const criterion all[] = {
        {1, "parser correctness", parser_correctness},
        {2, "rva/foa mapping", rva_mapping},
        {3, "editor structure", editor_structure},
        {4, "gradient suite", gradient_suite},
        {5, "loss closed forms", loss_closed_forms},
        {6, "shape arithmetic", shape_arithmetic},
        {7, "desk-scale evasion", desk_evasion},
        {8, "discriminator capability", discriminator_capability},
        {9, "metric formulas", metric_formulas},
        {10, "end-to-end determinism", end_to_end_determinism},
    };
    int failed = 0;
    for (const auto& cr : all) {
        result r;
        try {
            r = cr.run();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        failed += r.pass ? 0 : 1;
        std::cout << (r.pass ? "PASS" : "FAIL") << " [" << cr.id << "] " << cr.name << ": " << r.detail << std::endl;
    }
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << (10 - failed) << "/10" << std::endl;
    return failed ? 1 : 0;
}
