#ifndef MALFOX_TOOLS_CLI_HPP
#define MALFOX_TOOLS_CLI_HPP

// Subcommands: parse, features, perturb, train, generate, evaluate, synth.
// Exit codes: 0 success, 1 partial failure, 2 usage/config, 3 editor,
// 4 training runtime.

#include <malfox/malfox.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace malfox::cli {

namespace fs = std::filesystem;

enum exit_code : int { ok = 0, partial = 1, usage = 2, editor_failure = 3, training_failure = 4 };

/// Thrown by command bodies to leave with a specific code.
struct exit_request {
    int code;
    std::string message;
};

/// File name up to its first '.', so "mal3.exe" and "mal3.adv.exe" share an id.
inline std::string sample_id(const fs::path& p)
{
    auto name = p.filename().string();
    auto id = name.substr(0, name.find('.'));
    if (id.empty())
        id = name;
    std::replace_if(id.begin(), id.end(), [](char c) { return c == ' ' || c == '\t' || c == ','; }, '_');
    return id;
}

inline bool is_editor_error(errc c)
{
    switch (c) {
    case errc::no_header_space:
    case errc::no_code_section:
    case errc::empty_registry:
    case errc::too_many_sections:
    case errc::not_pe32:
        return true;
    default:
        return false;
    }
}

inline std::uint8_t parse_key(const std::string& text)
{
    std::string digits = text;
    if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X'))
        digits = digits.substr(2);
    unsigned value = 0;
    std::size_t used = 0;
    try {
        value = static_cast<unsigned>(std::stoul(digits, &used, 16));
    } catch (const std::exception&) {
        used = 0;
    }
    if (digits.empty() || used != digits.size() || value > 0xff)
        throw exit_request{usage, "--key must be a hex byte, got '" + text + "'"};
    return static_cast<std::uint8_t>(value);
}

inline void require_file(const fs::path& p, const std::string& what)
{
    if (!fs::is_regular_file(p))
        throw exit_request{usage, what + " not found: " + p.string()};
}

struct dataset_entry {
    std::string id;
    fs::path path;
    bool malicious = false;
};

/// Lines `label<TAB>path`, label in {malicious, benign}; `#` lines are skipped.
inline std::vector<dataset_entry> read_dataset(const fs::path& manifest)
{
    require_file(manifest, "dataset manifest");
    std::istringstream in(read_text_file(manifest));
    std::vector<dataset_entry> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        const auto tab = line.find('\t');
        const auto label = line.substr(0, tab);
        if (tab == std::string::npos || (label != "malicious" && label != "benign"))
            throw exit_request{usage, manifest.string() + ":" + std::to_string(line_no) +
                                          ": expected malicious|benign<TAB>path"};
        fs::path p = line.substr(tab + 1);
        if (p.is_relative())
            p = manifest.parent_path() / p;
        require_file(p, "dataset file");
        out.push_back({sample_id(p), p, label == "malicious"});
    }
    if (out.empty())
        throw exit_request{usage, "dataset manifest lists no files: " + manifest.string()};
    return out;
}

/// Key-value run manifest. Keys: dataset, vocab, registry, ensemble, train,
/// out, seed. Relative paths resolve against the manifest's directory.
struct run_manifest {
    fs::path dataset, vocab, registry, ensemble, train, out;
    std::uint64_t seed = 1;

    static run_manifest load(const fs::path& file)
    {
        require_file(file, "run manifest");
        const auto doc = kv_document::parse(read_text_file(file));
        const auto base = file.parent_path();
        auto resolve = [&](const std::string& key, bool required) -> fs::path {
            auto v = doc.find(key);
            if (!v) {
                if (required)
                    throw exit_request{usage, "run manifest lacks '" + key + "'"};
                return {};
            }
            fs::path p = *v;
            return p.is_relative() ? base / p : p;
        };
        run_manifest m;
        m.dataset = resolve("dataset", true);
        m.vocab = resolve("vocab", true);
        m.registry = resolve("registry", true);
        m.ensemble = resolve("ensemble", false);
        m.train = resolve("train", false);
        m.out = resolve("out", false);
        m.seed = doc.get_int<std::uint64_t>("seed", m.seed);
        return m;
    }
};

inline pe::vocabulary load_vocab(const fs::path& p)
{
    require_file(p, "vocabulary");
    return pe::vocabulary::from_text(read_text_file(p));
}

inline editor::stub_registry load_registry(const fs::path& p)
{
    require_file(p, "registry manifest");
    return editor::stub_registry::from_manifest(read_text_file(p), p.parent_path());
}

/// Ensemble seed comes from the config file when it names one, else `seed`.
inline detect::sim_ensemble load_ensemble(const fs::path& cfg_path, std::uint64_t seed, const pe::vocabulary& vocab,
                                          const std::vector<dataset_entry>& dataset)
{
    kv_document doc;
    if (!cfg_path.empty()) {
        require_file(cfg_path, "ensemble config");
        doc = kv_document::parse(read_text_file(cfg_path));
    }
    auto cfg = detect::sim_ensemble_config::from_kv(doc);
    if (!doc.contains("seed"))
        cfg.seed = seed;
    std::vector<detect::labelled_file> corpus;
    for (const auto& e : dataset)
        corpus.push_back({read_file(e.path), e.malicious});
    return detect::sim_ensemble::build(cfg, vocab, corpus);
}

struct run_inputs {
    std::vector<dataset_entry> dataset;
    pe::vocabulary vocab;
    editor::stub_registry registry;
    train::train_config config;
};

inline run_inputs load_run(const run_manifest& m)
{
    run_inputs r;
    r.dataset = read_dataset(m.dataset);
    r.vocab = load_vocab(m.vocab);
    r.registry = load_registry(m.registry);
    if (!m.train.empty()) {
        require_file(m.train, "train config");
        r.config = train::train_config::from_kv(kv_document::parse(read_text_file(m.train)));
    }
    r.config.seed = m.seed;
    return r;
}

// ---------------------------------------------------------------- parse

inline int cmd_parse(const fs::path& file, std::ostream& out)
{
    if (!fs::is_regular_file(file))
        throw exit_request{usage, "not a regular file: " + file.string()};
    const auto bytes = read_file(file);
    const auto img = pe::parse_pe(bytes);
    const auto imports = pe::walk_imports(img);

    out << "file " << file.string() << '\n'
        << "size " << bytes.size() << '\n'
        << "sha256 " << sha256_hex(bytes) << '\n'
        << std::hex << std::setfill('0') << "machine 0x" << std::setw(4) << img.file.machine << '\n'
        << "characteristics 0x" << std::setw(4) << img.file.characteristics << '\n'
        << "format " << (img.is_pe32() ? "PE32" : "PE32+") << '\n'
        << "entry_point 0x" << std::setw(8) << img.optional.entry_point_rva << '\n'
        << "image_base 0x" << std::setw(8) << img.optional.image_base << '\n'
        << "section_alignment 0x" << img.optional.section_alignment << '\n'
        << "file_alignment 0x" << img.optional.file_alignment << '\n'
        << "size_of_image 0x" << img.optional.size_of_image << '\n'
        << std::dec << "sections " << img.sections.size() << '\n';
    for (const auto& s : img.sections) {
        const auto& h = s.header;
        out << std::hex << "  " << std::left << std::setfill(' ') << std::setw(8) << h.name_string() << std::right
            << std::setfill('0') << " va=0x" << std::setw(8) << h.virtual_address << " vsize=0x" << std::setw(8)
            << h.virtual_size << " raw=0x" << std::setw(8) << h.pointer_to_raw_data << " rawsize=0x" << std::setw(8)
            << h.size_of_raw_data << " flags=0x" << std::setw(8) << h.characteristics << std::dec << '\n';
    }
    out << "imports " << imports.size() << '\n';
    for (const auto& e : imports) {
        out << "  " << e.dll_name << ':';
        for (const auto& f : e.function_names)
            out << ' ' << f;
        if (e.by_ordinal_count)
            out << " (+" << e.by_ordinal_count << " by ordinal)";
        out << '\n';
    }
    out << std::setfill(' ');
    return ok;
}

// ---------------------------------------------------------------- features

inline int cmd_features(const std::vector<fs::path>& files, const std::optional<fs::path>& vocab_path,
                        const fs::path& out_dir, std::ostream& out, std::ostream& err)
{
    if (files.empty())
        throw exit_request{usage, "features needs at least one input file"};
    fs::create_directories(out_dir);
    int status = ok;
    std::vector<std::pair<std::string, pe::feature_set>> sets;
    for (const auto& f : files) {
        try {
            if (!fs::is_regular_file(f))
                throw error(errc::io_error, "not a regular file");
            sets.emplace_back(sample_id(f), pe::extract_features(pe::parse_pe(read_file(f))));
        } catch (const error& e) {
            err << f.string() << ": " << e.what() << '\n';
            status = partial;
        }
    }
    const fs::path vfile = vocab_path.value_or(out_dir / "vocab.txt");
    pe::vocabulary vocab;
    if (vocab_path && fs::exists(*vocab_path)) {
        vocab = load_vocab(*vocab_path);
    } else {
        std::vector<pe::feature_set> only;
        for (const auto& [id, s] : sets)
            only.push_back(s);
        vocab = pe::build_vocabulary(only);
        write_text_file(vfile, vocab.to_text());
        out << "vocabulary " << vfile.string() << " (" << vocab.size() << " names)\n";
    }
    pe::feature_file ff;
    ff.vocab_hash = vocab.digest();
    ff.length = vocab.size();
    for (const auto& [id, s] : sets)
        ff.rows.emplace_back(id, pe::vectorize(s, vocab));
    const auto ffile = out_dir / "features.txt";
    write_text_file(ffile, ff.to_text());
    out << "features " << ffile.string() << " (" << ff.rows.size() << " rows)\n";
    return status;
}

// ---------------------------------------------------------------- perturb

inline int cmd_perturb(const fs::path& file, const std::string& path_literal, const fs::path& registry_path,
                       std::uint8_t key, std::uint64_t seed, const fs::path& out_file, std::ostream& out)
{
    editor::perturbation_path path;
    try {
        path = editor::perturbation_path::from_string(path_literal);
    } catch (const error& e) {
        throw exit_request{usage, e.what()};
    }
    require_file(file, "input");
    const auto registry = load_registry(registry_path);
    const auto img = pe::parse_pe(read_file(file));
    std::mt19937_64 rng(seed);
    path.noise = train::sample_noise(rng).mapped;
    auto [result, report] = editor::apply_path(img, path, registry, key);
    write_file(out_file, pe::serialize_pe(result));
    const auto text = "path=" + path.to_string() + '\n' + report.to_text();
    write_text_file(out_file.string() + ".report", text);
    out << text;
    return ok;
}

// ---------------------------------------------------------------- train

struct train_overrides {
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> out;
    std::optional<std::size_t> max_epochs;
    std::optional<std::size_t> minibatch;
};

inline std::vector<train::malware_sample> malware_samples(const run_inputs& r)
{
    std::vector<train::malware_sample> out;
    for (const auto& e : r.dataset)
        if (e.malicious) {
            auto img = pe::parse_pe(read_file(e.path));
            auto fv = pe::vectorize(pe::extract_features(img), r.vocab);
            out.push_back({std::move(img), std::move(fv)});
        }
    return out;
}

inline int cmd_train(const fs::path& manifest_path, const train_overrides& o, std::ostream& out)
{
    auto m = run_manifest::load(manifest_path);
    if (o.seed)
        m.seed = *o.seed;
    if (o.out)
        m.out = *o.out;
    if (m.out.empty())
        throw exit_request{usage, "no output directory: set 'out' in the manifest or pass --out"};

    run_inputs r;
    std::vector<train::malware_sample> malware;
    std::vector<pe::feature_vector> benign;
    std::optional<detect::sim_ensemble> ensemble;
    nn::net g, d;
    try {
        r = load_run(m);
        if (o.max_epochs)
            r.config.max_epochs = *o.max_epochs;
        if (o.minibatch)
            r.config.minibatch = *o.minibatch;
        r.config.validate();
        malware = malware_samples(r);
        for (const auto& e : r.dataset)
            if (!e.malicious)
                benign.push_back(pe::vectorize(pe::extract_features(pe::parse_pe(read_file(e.path))), r.vocab));
        ensemble = load_ensemble(m.ensemble, m.seed, r.vocab, r.dataset);
        g = nn::build_generator(nn::generator_config::desk(r.vocab.size()), m.seed + 1);
        d = nn::build_discriminator(nn::discriminator_config::desk(r.vocab.size()), m.seed + 2);
        fs::create_directories(m.out);
    } catch (const error& e) {
        throw exit_request{usage, e.what()};
    }

    const auto ckpt_dir = m.out / "checkpoints";
    const auto every = r.config.checkpoint_every;
    auto on_epoch = [&](const train::epoch_record& rec, nn::net& gen, nn::net& disc) {
        if (every == 0 || rec.epoch % every != 0)
            return;
        fs::create_directories(ckpt_dir);
        std::ostringstream stem;
        stem << "epoch" << std::setw(4) << std::setfill('0') << rec.epoch;
        write_file(ckpt_dir / (stem.str() + ".generator.ckpt"), nn::save_checkpoint(gen));
        write_file(ckpt_dir / (stem.str() + ".discriminator.ckpt"), nn::save_checkpoint(disc));
    };

    train::train_result result;
    try {
        result = train::train(r.config, malware, benign, std::move(g), std::move(d), r.registry, *ensemble, on_epoch);
        write_text_file(m.out / "history.csv", result.history.to_csv());
        write_file(m.out / "generator.ckpt", nn::save_checkpoint(result.generator));
        write_file(m.out / "discriminator.ckpt", nn::save_checkpoint(result.discriminator));
    } catch (const error& e) {
        throw exit_request{training_failure, e.what()};
    }
    const auto& h = result.history;
    out << "epochs " << h.epochs.size() << (h.converged ? " (converged)" : "") << '\n'
        << "skipped " << h.skipped_samples << '\n';
    if (!h.epochs.empty()) {
        const auto& last = h.epochs.back();
        out << "final loss_d " << csv_number(last.loss_d) << " loss_g " << csv_number(last.loss_g)
            << " detection_rate " << csv_number(last.detection_rate) << '\n';
    }
    out << "history " << (m.out / "history.csv").string() << '\n';
    return ok;
}

// ---------------------------------------------------------------- generate

inline int cmd_generate(const fs::path& manifest_path, const fs::path& checkpoint, std::optional<std::uint64_t> seed,
                        const fs::path& out_dir, std::ostream& out, std::ostream& err)
{
    auto m = run_manifest::load(manifest_path);
    if (seed)
        m.seed = *seed;
    run_inputs r;
    std::vector<train::malware_sample> malware;
    nn::net g;
    try {
        r = load_run(m);
        malware = malware_samples(r);
        require_file(checkpoint, "generator checkpoint");
        g = nn::load_checkpoint(read_file(checkpoint));
    } catch (const error& e) {
        throw exit_request{usage, e.what()};
    }
    fs::create_directories(out_dir);
    std::vector<std::string> ids;
    for (const auto& e : r.dataset)
        if (e.malicious)
            ids.push_back(e.id);
    std::mt19937_64 rng(m.seed);
    int status = ok;
    for (std::size_t i = 0; i < malware.size(); ++i) {
        const auto noise = train::sample_noise(rng);
        try {
            auto ex = train::generate_example(malware[i], g, noise, r.registry, r.config.key);
            const auto file = out_dir / (ids[i] + ".adv.exe");
            write_file(file, ex.bytes);
            out << ids[i] << '\t' << ex.path.to_string() << '\t' << file.string() << '\n';
        } catch (const error& e) {
            err << ids[i] << ": " << e.what() << '\n';
            status = partial;
        }
    }
    return status;
}

// ---------------------------------------------------------------- evaluate

/// sample_id -> n from a CSV with `sample_id` and `n` columns.
inline std::map<std::string, std::size_t> read_original_counts(const fs::path& p)
{
    require_file(p, "originals");
    std::istringstream in(read_text_file(p));
    std::string line;
    if (!std::getline(in, line))
        throw exit_request{usage, "originals file is empty: " + p.string()};
    const auto header = csv_split(line);
    const auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw exit_request{usage, "originals file lacks a '" + name + "' column"};
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto id_col = col("sample_id");
    const auto n_col = col("n");
    std::map<std::string, std::size_t> counts;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        const auto f = csv_split(line);
        if (f.size() <= std::max(id_col, n_col) || f[n_col].empty())
            continue;
        counts[f[id_col]] = kv_document::parse_int<std::size_t>("n", f[n_col]);
    }
    return counts;
}

struct evaluate_options {
    std::vector<fs::path> samples;
    std::optional<fs::path> manifest;
    std::optional<fs::path> ensemble;
    std::optional<fs::path> vocab;
    std::optional<fs::path> dataset;
    std::optional<fs::path> originals;
    std::optional<std::uint64_t> seed;
    fs::path out_dir;
};

inline int cmd_evaluate(const evaluate_options& o, std::ostream& out, std::ostream& err)
{
    if (o.samples.empty())
        throw exit_request{usage, "evaluate needs at least one sample"};
    run_manifest m;
    if (o.manifest) {
        m = run_manifest::load(*o.manifest);
    }
    if (o.ensemble)
        m.ensemble = *o.ensemble;
    if (o.vocab)
        m.vocab = *o.vocab;
    if (o.dataset)
        m.dataset = *o.dataset;
    if (o.seed)
        m.seed = *o.seed;
    if (m.vocab.empty() || m.dataset.empty())
        throw exit_request{usage, "evaluate needs --vocab and --dataset (or --manifest)"};

    std::optional<detect::sim_ensemble> ens;
    std::optional<std::map<std::string, std::size_t>> originals;
    try {
        const auto dataset = read_dataset(m.dataset);
        ens = load_ensemble(m.ensemble, m.seed, load_vocab(m.vocab), dataset);
        if (o.originals)
            originals = read_original_counts(*o.originals);
    } catch (const error& e) {
        throw exit_request{usage, e.what()};
    }

    int status = ok;
    struct row {
        std::string id;
        detect::verdict v;
        std::optional<std::size_t> n_orig;
    };
    std::vector<row> rows;
    for (const auto& s : o.samples) {
        if (!fs::is_regular_file(s)) {
            err << s.string() << ": not a regular file\n";
            status = partial;
            continue;
        }
        row r{sample_id(s), ens->scan(read_file(s)), std::nullopt};
        if (originals) {
            if (auto it = originals->find(r.id); it != originals->end())
                r.n_orig = it->second;
            else {
                err << r.id << ": no original verdict\n";
                status = partial;
            }
        }
        rows.push_back(std::move(r));
    }

    fs::create_directories(o.out_dir);
    std::vector<std::pair<std::string, detect::verdict>> verdicts;
    std::ostringstream metrics;
    metrics << "sample_id,n,N,detection_rate,n_orig,evasive_rate\n";
    std::vector<double> det, det_orig, eva;
    for (const auto& r : rows) {
        verdicts.emplace_back(r.id, r.v);
        const double dr = detect::detection_rate(r.v);
        det.push_back(dr);
        double er = train::nan;
        if (r.n_orig) {
            det_orig.push_back(static_cast<double>(*r.n_orig) / static_cast<double>(r.v.entity_count()));
            if (*r.n_orig > 0) {
                er = detect::evasive_rate(*r.n_orig, r.v.n());
                eva.push_back(er);
            }
        }
        metrics << csv_field(r.id) << ',' << r.v.n() << ',' << r.v.entity_count() << ',' << csv_number(dr) << ','
                << (r.n_orig ? std::to_string(*r.n_orig) : std::string()) << ',' << csv_number(er) << '\n';
    }

    auto stats = [](const std::vector<double>& v) {
        std::array<double, 3> s{train::nan, train::nan, train::nan};
        if (v.empty())
            return s;
        double sum = 0;
        for (double x : v)
            sum += x;
        s[0] = sum / static_cast<double>(v.size());
        s[1] = *std::max_element(v.begin(), v.end());
        s[2] = *std::min_element(v.begin(), v.end());
        return s;
    };
    std::ostringstream summary;
    summary << "metric,Average,Max,Min\n";
    auto line = [&](const std::string& name, const std::vector<double>& v) {
        const auto s = stats(v);
        summary << csv_field(name) << ',' << csv_number(s[0]) << ',' << csv_number(s[1]) << ',' << csv_number(s[2])
                << '\n';
    };
    if (originals)
        line("detection_rate_original", det_orig);
    line("detection_rate", det);
    line("evasive_rate", originals ? eva : std::vector<double>{});

    write_text_file(o.out_dir / "verdicts.csv", detect::verdicts_to_csv(verdicts));
    write_text_file(o.out_dir / "metrics.csv", metrics.str());
    write_text_file(o.out_dir / "summary.csv", summary.str());
    out << summary.str();
    return status;
}

// ---------------------------------------------------------------- synth

/// Writes a seeded toy corpus with manifests: samples/, stubs/, dataset.tsv,
/// registry.tsv, vocab.txt, ensemble.kv, train.kv and run.kv.
inline int cmd_synth(const fs::path& dir, std::uint64_t seed, std::ostream& out)
{
    corpus::corpus_config cc;
    cc.seed = seed;
    const auto c = corpus::make_synthetic_corpus(cc);
    fs::create_directories(dir / "samples");
    fs::create_directories(dir / "stubs");

    std::ostringstream dataset;
    std::vector<pe::feature_set> sets;
    for (const auto& s : c.samples) {
        const auto rel = fs::path("samples") / (s.id + ".exe");
        write_file(dir / rel, s.bytes);
        dataset << (s.malicious ? "malicious" : "benign") << '\t' << rel.generic_string() << '\n';
        sets.push_back(pe::extract_features(pe::parse_pe(s.bytes)));
    }
    std::ostringstream registry;
    auto put = [&](const std::vector<byte_vector>& list, const std::string& kind, const std::string& ext) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto rel = fs::path("stubs") / (kind + std::to_string(i) + ext);
            write_file(dir / rel, list[i]);
            registry << kind << '\t' << rel.generic_string() << '\n';
        }
    };
    put(c.registry.obfusmal_stubs, "obfusmal", ".dll");
    put(c.registry.stealmal_hosts, "stealmal", ".exe");
    put(c.registry.hollowmal_hosts, "hollowmal-host", ".exe");
    put(c.registry.hollowmal_dlls, "hollowmal-dll", ".dll");

    const auto vocab = pe::build_vocabulary(sets);
    write_text_file(dir / "dataset.tsv", dataset.str());
    write_text_file(dir / "registry.tsv", registry.str());
    write_text_file(dir / "vocab.txt", vocab.to_text());
    write_text_file(dir / "ensemble.kv", "entities = 5\n");
    write_text_file(dir / "train.kv", "minibatch = 32\nmax_epochs = 200\ndelta = 1e-4\ncheckpoint_every = 50\n");
    write_text_file(dir / "run.kv", "dataset = dataset.tsv\nvocab = vocab.txt\nregistry = registry.tsv\n"
                                    "ensemble = ensemble.kv\ntrain = train.kv\nout = run\nseed = " +
                                        std::to_string(seed) + "\n");
    out << "samples " << c.samples.size() << '\n' << "vocabulary " << vocab.size() << '\n'
        << "manifest " << (dir / "run.kv").string() << '\n';
    return ok;
}

// ---------------------------------------------------------------- entry

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"malfox: PE perturbation GAN toolkit"};
    app.require_subcommand(1);

    std::string file, path_literal = "000", key_text = "15";
    std::vector<std::string> files;
    std::string vocab, registry, ensemble, dataset, originals, manifest, out_path, checkpoint;
    std::uint64_t seed = 1;
    std::size_t max_epochs = 0, minibatch = 0;

    auto* parse = app.add_subcommand("parse", "print headers, sections and imports of a PE file");
    parse->add_option("file", file, "PE file")->required();

    auto* features = app.add_subcommand("features", "extract import feature vectors");
    features->add_option("files", files, "PE files");
    features->add_option("--vocab", vocab, "vocabulary file; built from the inputs when missing");
    features->add_option("--out", out_path, "output directory")->required();

    auto* perturb = app.add_subcommand("perturb", "apply a perturbation path to one file");
    perturb->add_option("file", file, "PE file")->required();
    perturb->add_option("--path", path_literal, "three 0/1 characters (obfusmal, stealmal, hollowmal)")->required();
    perturb->add_option("--registry", registry, "registry manifest (method<TAB>path)")->required();
    perturb->add_option("--key", key_text, "XOR key as a hex byte");
    perturb->add_option("--seed", seed, "seed for instance selection");
    perturb->add_option("--out", out_path, "output file")->required();

    auto* train_cmd = app.add_subcommand("train", "train the Generator and Discriminator");
    train_cmd->add_option("manifest", manifest, "run manifest")->required();
    auto* train_seed = train_cmd->add_option("--seed", seed, "override the manifest seed");
    auto* train_out = train_cmd->add_option("--out", out_path, "override the output directory");
    auto* train_epochs = train_cmd->add_option("--max-epochs", max_epochs, "override max_epochs");
    auto* train_batch = train_cmd->add_option("--minibatch", minibatch, "override minibatch");

    auto* generate = app.add_subcommand("generate", "write adversarial examples with a trained Generator");
    generate->add_option("manifest", manifest, "run manifest")->required();
    generate->add_option("--checkpoint", checkpoint, "generator checkpoint")->required();
    auto* generate_seed = generate->add_option("--seed", seed, "noise seed");
    generate->add_option("--out", out_path, "output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "scan samples and report detection and evasive rates");
    evaluate->add_option("samples", files, "files to scan");
    evaluate->add_option("--manifest", manifest, "run manifest supplying dataset, vocab and ensemble");
    evaluate->add_option("--ensemble", ensemble, "ensemble config");
    evaluate->add_option("--vocab", vocab, "vocabulary file");
    evaluate->add_option("--dataset", dataset, "dataset manifest the ensemble is built from");
    evaluate->add_option("--originals", originals, "CSV of original verdicts (sample_id, n)");
    auto* evaluate_seed = evaluate->add_option("--seed", seed, "ensemble seed");
    evaluate->add_option("--out", out_path, "output directory")->required();

    auto* synth = app.add_subcommand("synth", "write a seeded toy corpus and manifests");
    synth->add_option("--seed", seed, "corpus seed");
    synth->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return usage;
    }

    auto opt_path = [](const std::string& s) -> std::optional<fs::path> {
        if (s.empty())
            return std::nullopt;
        return fs::path(s);
    };

    int default_code = usage;
    try {
        if (parse->parsed())
            return cmd_parse(file, out);
        if (features->parsed())
            return cmd_features({files.begin(), files.end()}, opt_path(vocab), out_path, out, err);
        if (perturb->parsed()) {
            default_code = editor_failure;
            return cmd_perturb(file, path_literal, registry, parse_key(key_text), seed, out_path, out);
        }
        if (train_cmd->parsed()) {
            train_overrides o;
            if (train_seed->count())
                o.seed = seed;
            if (train_out->count())
                o.out = out_path;
            if (train_epochs->count())
                o.max_epochs = max_epochs;
            if (train_batch->count())
                o.minibatch = minibatch;
            return cmd_train(manifest, o, out);
        }
        if (generate->parsed())
            return cmd_generate(manifest, checkpoint,
                                generate_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, out_path,
                                out, err);
        if (evaluate->parsed()) {
            evaluate_options o;
            o.samples.assign(files.begin(), files.end());
            o.manifest = opt_path(manifest);
            o.ensemble = opt_path(ensemble);
            o.vocab = opt_path(vocab);
            o.dataset = opt_path(dataset);
            o.originals = opt_path(originals);
            if (evaluate_seed->count())
                o.seed = seed;
            o.out_dir = out_path;
            return cmd_evaluate(o, out, err);
        }
        if (synth->parsed())
            return cmd_synth(out_path, seed, out);
    } catch (const exit_request& e) {
        err << "error: " << e.message << '\n';
        return e.code;
    } catch (const error& e) {
        err << "error: " << e.what() << '\n';
        if (default_code == editor_failure)
            return is_editor_error(e.code()) ? editor_failure : usage;
        return default_code;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    }
    return usage;
}

} // namespace malfox::cli

#endif // MALFOX_TOOLS_CLI_HPP
