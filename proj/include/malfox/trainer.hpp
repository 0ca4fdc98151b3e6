#ifndef MALFOX_TRAINER_HPP
#define MALFOX_TRAINER_HPP

// Alternating Discriminator/Generator updates with the PE editor and the
// detector in the loop.
//
// Discriminator step: a malware minibatch and Gaussian noise go through the
// Generator (infer mode); the chosen paths are applied and the detector scans
// the results. Each adversarial example enters L_D as malicious when at least
// label_fraction of the entities flag it and as benign otherwise; a benign
// minibatch (path 000) is always on the benign side.
//
// Probe set: every malware sample under all eight paths, scanned once. Training
// opens with Discriminator-only steps on it, and a few probe rows join every
// later Discriminator minibatch.
//
// Generator step: fresh minibatch and noise, Generator in train mode, paths
// binarized for the editor. Examples labelled benign are dropped; L_G is the
// mean log D over the rest, with D frozen in infer mode. The path bits carry
// dL/dpath straight back onto the Generator's sigmoid outputs.

#include <malfox/csv.hpp>
#include <malfox/detector.hpp>
#include <malfox/error.hpp>
#include <malfox/kv.hpp>
#include <malfox/nn/checkpoint.hpp>
#include <malfox/nn/loss.hpp>
#include <malfox/nn/models.hpp>
#include <malfox/nn/net.hpp>
#include <malfox/nn/ops.hpp>
#include <malfox/nn/optimizer.hpp>
#include <malfox/pe_editor.hpp>
#include <malfox/pe_model.hpp>
#include <malfox/pe_parser.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace malfox::train {

inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct train_config {
    std::size_t minibatch = 32;
    std::size_t max_epochs = 200;
    double delta = 1e-4; // convergence: mean |parameter change| per epoch, both nets
    std::uint64_t seed = 1;
    std::string noise_scheme = "gaussian-cdf";
    std::uint8_t key = editor::default_key;
    double g_learning_rate = 1e-3;
    double d_learning_rate = 1e-3;
    std::size_t checkpoint_every = 0; // epochs; 0 = never
    std::size_t max_redraws = 8;
    std::size_t warmup_steps = 2000;  // cap on Discriminator-only steps before the alternating loop
    double warmup_accuracy = 0.95;    // warm-up stops once the Discriminator reaches this
    std::size_t probe_rows = 8;       // probe-set rows added to each Discriminator minibatch
    double label_fraction = 0.5;      // share of entities that must flag an example to label it malicious

    /// Keys: minibatch, max_epochs, delta, seed, noise, key, g_learning_rate,
    /// d_learning_rate, checkpoint_every, warmup_steps, warmup_accuracy,
    /// probe_rows, label_fraction.
    static train_config from_kv(const kv_document& doc)
    {
        train_config c;
        c.minibatch = doc.get_int<std::size_t>("minibatch", c.minibatch);
        c.max_epochs = doc.get_int<std::size_t>("max_epochs", c.max_epochs);
        c.delta = doc.get_double("delta", c.delta);
        c.seed = doc.get_int<std::uint64_t>("seed", c.seed);
        c.noise_scheme = doc.get_string("noise", c.noise_scheme);
        c.key = doc.get_int<std::uint8_t>("key", c.key);
        c.g_learning_rate = doc.get_double("g_learning_rate", c.g_learning_rate);
        c.d_learning_rate = doc.get_double("d_learning_rate", c.d_learning_rate);
        c.checkpoint_every = doc.get_int<std::size_t>("checkpoint_every", c.checkpoint_every);
        c.warmup_steps = doc.get_int<std::size_t>("warmup_steps", c.warmup_steps);
        c.warmup_accuracy = doc.get_double("warmup_accuracy", c.warmup_accuracy);
        c.probe_rows = doc.get_int<std::size_t>("probe_rows", c.probe_rows);
        c.label_fraction = doc.get_double("label_fraction", c.label_fraction);
        c.validate();
        return c;
    }

    void validate() const
    {
        if (minibatch == 0)
            throw error(errc::config_invalid, "minibatch must be at least 1");
        if (!(delta > 0))
            throw error(errc::config_invalid, "delta must be positive");
        if (noise_scheme != "gaussian-cdf")
            throw error(errc::config_invalid, "unknown noise scheme '" + noise_scheme + "'");
        if (!(g_learning_rate > 0) || !(d_learning_rate > 0))
            throw error(errc::config_invalid, "learning rates must be positive");
        if (!(warmup_accuracy >= 0 && warmup_accuracy <= 1))
            throw error(errc::config_invalid, "warmup_accuracy must be in [0, 1]");
        if (!(label_fraction >= 0 && label_fraction <= 1))
            throw error(errc::config_invalid, "label_fraction must be in [0, 1]");
    }

    /// Detector label: at least one entity, and at least label_fraction of them.
    bool labels_malicious(const detect::verdict& v) const
    {
        return v.n() > 0 && static_cast<double>(v.n()) >= label_fraction * static_cast<double>(v.entity_count());
    }
};

struct noise_triple {
    std::array<double, 3> raw{};    // N(0,1), fed to the Generator
    std::array<double, 3> mapped{}; // standard normal CDF of raw, in [0,1); selects instances
};

inline double standard_normal_cdf(double x)
{
    const double p = 0.5 * std::erfc(-x / std::sqrt(2.0));
    return std::min(p, std::nextafter(1.0, 0.0));
}

inline noise_triple noise_from_raw(const std::array<double, 3>& raw)
{
    noise_triple t;
    t.raw = raw;
    for (std::size_t i = 0; i < 3; ++i)
        t.mapped[i] = standard_normal_cdf(raw[i]);
    return t;
}

inline noise_triple sample_noise(std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, 3> raw{};
    for (auto& v : raw)
        v = normal(rng);
    return noise_from_raw(raw);
}

/// Feature bits, then the three path bits.
inline std::vector<double> discriminator_input(const pe::feature_vector& fv, const editor::perturbation_path& path)
{
    std::vector<double> x(fv.bits.begin(), fv.bits.end());
    for (auto b : path.bits)
        x.push_back(b ? 1.0 : 0.0);
    return x;
}

inline std::vector<double> generator_input(const pe::feature_vector& fv, const noise_triple& noise)
{
    std::vector<double> x(fv.bits.begin(), fv.bits.end());
    x.insert(x.end(), noise.raw.begin(), noise.raw.end());
    return x;
}

inline nn::tensor stack_rows(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty())
        throw error(errc::empty_dataset, "no rows to stack");
    const std::size_t width = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * width);
    for (const auto& r : rows) {
        if (r.size() != width)
            throw error(errc::shape_mismatch, "ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return nn::tensor({rows.size(), width}, std::move(data));
}

inline editor::perturbation_path path_from_output(std::span<const double> o, const noise_triple& noise)
{
    const auto bits = nn::binarize(o);
    if (bits.size() != 3)
        throw error(errc::shape_mismatch, "generator must emit three values");
    editor::perturbation_path p;
    for (std::size_t i = 0; i < 3; ++i)
        p.bits[i] = bits[i] != 0;
    p.noise = noise.mapped;
    return p;
}

struct malware_sample {
    pe::pe_image image;
    pe::feature_vector features;
};

struct example {
    byte_vector bytes;
    editor::perturbation_path path;
};

/// One adversarial example for one malware sample; the Generator runs in infer mode.
inline example generate_example(const malware_sample& m, nn::net& gen, const noise_triple& noise,
                                 const editor::stub_registry& registry, std::uint8_t key = editor::default_key)
{
    const auto out = gen.forward(stack_rows({generator_input(m.features, noise)}), nn::mode::infer);
    const auto path = path_from_output(out.values(), noise);
    auto [image, report] = editor::apply_path(m.image, path, registry, key);
    return {pe::serialize_pe(image), path};
}

struct epoch_record {
    std::size_t epoch = 0;
    double loss_d = nan;
    double loss_g = nan;
    double d_accuracy = nan;
    double detection_rate = nan; // mean over the epoch's Generator-step examples
    double evasive_rate = nan;   // mean over those whose original is detected
};

struct train_history {
    std::vector<epoch_record> epochs;
    std::size_t skipped_samples = 0;
    std::size_t warmup_steps = 0;
    bool converged = false;

    std::string to_csv() const
    {
        std::ostringstream os;
        os << "epoch,loss_d,loss_g,d_accuracy,detection_rate,evasive_rate\n";
        for (const auto& e : epochs)
            os << e.epoch << ',' << csv_number(e.loss_d) << ',' << csv_number(e.loss_g) << ','
               << csv_number(e.d_accuracy) << ',' << csv_number(e.detection_rate) << ','
               << csv_number(e.evasive_rate) << '\n';
        return os.str();
    }
};

struct train_result {
    nn::net generator;
    nn::net discriminator;
    train_history history;
};

using epoch_callback = std::function<void(const epoch_record&, nn::net& gen, nn::net& disc)>;

struct step_result {
    double loss = nan; // L_D plus the l2 penalty
    double accuracy = nan;
};

/// One Adam step of the Discriminator on labelled rows (true = malicious).
inline step_result discriminator_step(nn::net& d, nn::adam& opt, const std::vector<std::vector<double>>& rows,
                                      const std::vector<bool>& is_malicious, std::mt19937_64& rng)
{
    const auto out = d.forward(stack_rows(rows), nn::mode::train, &rng);
    const auto p = nn::malicious_probability(out);
    std::vector<double> pb, pm;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        (is_malicious[i] ? pm : pb).push_back(p[i]);
        correct += (p[i] > 0.5) == is_malicious[i] ? 1 : 0;
    }
    step_result r;
    r.loss = nn::loss_discriminator(pb, pm) + d.l2_penalty();
    r.accuracy = detect::accuracy(correct, p.size());
    const auto lg = nn::loss_discriminator_grad(pb, pm);
    std::vector<double> dp(p.size());
    for (std::size_t i = 0, kb = 0, km = 0; i < p.size(); ++i)
        dp[i] = is_malicious[i] ? lg.malware[km++] : lg.benign[kb++];
    d.zero_grad();
    d.backward(nn::malicious_probability_grad(dp));
    d.add_l2_gradients();
    opt.step(d);
    return r;
}

/// Fraction of rows whose infer-mode prediction (p > 0.5) matches the label.
inline double discriminator_accuracy(nn::net& d, const std::vector<std::vector<double>>& rows,
                                     const std::vector<bool>& is_malicious)
{
    const auto p = nn::malicious_probability(d.forward(stack_rows(rows), nn::mode::infer));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        correct += (p[i] > 0.5) == is_malicious[i] ? 1 : 0;
    return detect::accuracy(correct, p.size());
}

namespace detail {

inline double mean_abs_delta(const std::vector<double>& before, const std::vector<double>& after)
{
    if (before.empty())
        return 0.0;
    double s = 0;
    for (std::size_t i = 0; i < before.size(); ++i)
        s += std::abs(after[i] - before[i]);
    return s / static_cast<double>(before.size());
}

struct generated_batch {
    std::vector<std::size_t> sample_index;
    std::vector<noise_triple> noise;
    std::vector<editor::perturbation_path> paths;
    std::vector<detect::verdict> verdicts;
    nn::tensor gen_output;
};

class loop {
public:
    loop(const train_config& cfg, const std::vector<malware_sample>& malware,
         const std::vector<pe::feature_vector>& benign, const editor::stub_registry& registry,
         const detect::detector& det)
        : cfg_(cfg), malware_(malware), benign_(benign), registry_(registry), det_(det), rng_(cfg.seed),
          original_n_(malware.size())
    {
    }

    std::size_t skipped = 0;

    /// Sample, run G, edit and scan; failed rows are redrawn, then dropped.
    generated_batch generate(nn::net& gen, nn::mode m)
    {
        generated_batch b;
        std::uniform_int_distribution<std::size_t> pick(0, malware_.size() - 1);
        for (std::size_t i = 0; i < cfg_.minibatch; ++i) {
            b.sample_index.push_back(pick(rng_));
            b.noise.push_back(sample_noise(rng_));
        }
        std::vector<std::optional<byte_vector>> outputs;
        for (std::size_t attempt = 0;; ++attempt) {
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < b.sample_index.size(); ++i)
                rows.push_back(generator_input(malware_[b.sample_index[i]].features, b.noise[i]));
            b.gen_output = gen.forward(stack_rows(rows), m, &rng_);
            b.paths.clear();
            outputs.assign(b.sample_index.size(), std::nullopt);
            std::vector<std::size_t> failed;
            for (std::size_t i = 0; i < b.sample_index.size(); ++i) {
                b.paths.push_back(path_from_output(b.gen_output.values().subspan(i * 3, 3), b.noise[i]));
                try {
                    auto [img, rep] = editor::apply_path(malware_[b.sample_index[i]].image, b.paths[i], registry_, cfg_.key);
                    outputs[i] = pe::serialize_pe(img);
                } catch (const error&) {
                    failed.push_back(i);
                }
            }
            skipped += failed.size();
            if (failed.empty() || attempt >= cfg_.max_redraws) {
                drop(b, outputs, failed);
                break;
            }
            for (auto i : failed) {
                b.sample_index[i] = pick(rng_);
                b.noise[i] = sample_noise(rng_);
            }
        }
        if (b.sample_index.empty())
            throw error(errc::empty_dataset, "every sample in the minibatch failed to edit");
        for (const auto& bytes : outputs)
            b.verdicts.push_back(det_.scan(*bytes));
        return b;
    }

    std::size_t original_detections(std::size_t idx)
    {
        if (!original_n_[idx])
            original_n_[idx] = det_.scan(pe::serialize_pe(malware_[idx].image)).n();
        return *original_n_[idx];
    }

    std::vector<std::size_t> benign_minibatch()
    {
        std::uniform_int_distribution<std::size_t> pick(0, benign_.size() - 1);
        std::vector<std::size_t> idx(cfg_.minibatch);
        for (auto& i : idx)
            i = pick(rng_);
        return idx;
    }

    std::mt19937_64& rng() { return rng_; }

    /// Every malware sample under every Table 6 path, labelled by the detector;
    /// benign rows at path 000. Rows the editor rejects are skipped.
    void build_probe_set()
    {
        for (const auto& m : malware_) {
            for (auto path : editor::all_paths()) {
                path.noise = sample_noise(rng_).mapped;
                try {
                    auto [img, rep] = editor::apply_path(m.image, path, registry_, cfg_.key);
                    probe_labels_.push_back(cfg_.labels_malicious(det_.scan(pe::serialize_pe(img))));
                    probe_rows_.push_back(discriminator_input(m.features, path));
                } catch (const error&) {
                    ++skipped;
                }
            }
        }
        if (probe_rows_.empty())
            throw error(errc::empty_dataset, "no malware sample survives any perturbation path");
    }

    void add_probe_rows(std::size_t count, std::vector<std::vector<double>>& rows, std::vector<bool>& labels)
    {
        std::uniform_int_distribution<std::size_t> pick(0, probe_rows_.size() - 1);
        for (std::size_t k = 0; k < count; ++k) {
            const auto i = pick(rng_);
            rows.push_back(probe_rows_[i]);
            labels.push_back(probe_labels_[i]);
        }
    }

    /// Discriminator-only steps on probe rows plus benign rows until its
    /// infer-mode accuracy on the whole probe set reaches the target.
    std::size_t warm_up(nn::net& d, nn::adam& opt)
    {
        auto all_rows = probe_rows_;
        auto all_labels = probe_labels_;
        for (const auto& b : benign_) {
            all_rows.push_back(discriminator_input(b, editor::perturbation_path{}));
            all_labels.push_back(false);
        }
        for (std::size_t step = 1; step <= cfg_.warmup_steps; ++step) {
            std::vector<std::vector<double>> rows;
            std::vector<bool> labels;
            for (auto i : benign_minibatch()) {
                rows.push_back(discriminator_input(benign_[i], editor::perturbation_path{}));
                labels.push_back(false);
            }
            add_probe_rows(cfg_.minibatch, rows, labels);
            discriminator_step(d, opt, rows, labels, rng_);
            if (step % warmup_check_interval == 0 &&
                discriminator_accuracy(d, all_rows, all_labels) >= cfg_.warmup_accuracy)
                return step;
        }
        return cfg_.warmup_steps;
    }

    static constexpr std::size_t warmup_check_interval = 50;

private:
    static void drop(generated_batch& b, std::vector<std::optional<byte_vector>>& outputs,
                     const std::vector<std::size_t>& failed)
    {
        if (failed.empty())
            return;
        generated_batch kept;
        std::vector<std::optional<byte_vector>> kept_out;
        std::vector<double> kept_rows;
        for (std::size_t i = 0; i < b.sample_index.size(); ++i) {
            if (!outputs[i])
                continue;
            kept.sample_index.push_back(b.sample_index[i]);
            kept.noise.push_back(b.noise[i]);
            kept.paths.push_back(b.paths[i]);
            kept_out.push_back(std::move(outputs[i]));
            for (std::size_t k = 0; k < 3; ++k)
                kept_rows.push_back(b.gen_output[i * 3 + k]);
        }
        kept.gen_output = nn::tensor({kept.sample_index.size(), 3}, std::move(kept_rows));
        b = std::move(kept);
        outputs = std::move(kept_out);
    }

    const train_config& cfg_;
    const std::vector<malware_sample>& malware_;
    const std::vector<pe::feature_vector>& benign_;
    const editor::stub_registry& registry_;
    const detect::detector& det_;
    std::mt19937_64 rng_;
    std::vector<std::optional<std::size_t>> original_n_;
    std::vector<std::vector<double>> probe_rows_;
    std::vector<bool> probe_labels_;
};

} // namespace detail

inline train_result train(const train_config& cfg, const std::vector<malware_sample>& malware,
                          const std::vector<pe::feature_vector>& benign, nn::net gen, nn::net disc,
                          const editor::stub_registry& registry, const detect::detector& det,
                          const epoch_callback& on_epoch = {})
{
    cfg.validate();
    train_result result{std::move(gen), std::move(disc), {}};
    if (cfg.max_epochs == 0)
        return result;
    if (malware.empty() || benign.empty())
        throw error(errc::empty_dataset, "training needs both malware and benign samples");
    const std::size_t width = malware.front().features.size();
    for (const auto& m : malware)
        if (m.features.size() != width)
            throw error(errc::vocab_mismatch, "malware feature vectors differ in length");
    for (const auto& b : benign)
        if (b.size() != width)
            throw error(errc::vocab_mismatch, "benign feature vector length differs from malware");
    auto& g = result.generator;
    auto& d = result.discriminator;
    if (g.input_shape() != nn::shape_t{width + 3} || g.output_shape() != nn::shape_t{3})
        throw error(errc::vocab_mismatch, "generator expects input " + nn::to_string(g.input_shape()) +
                                              ", vocabulary gives " + std::to_string(width) + " + 3");
    if (d.input_shape() != nn::shape_t{width + 3} || d.output_shape() != nn::shape_t{2})
        throw error(errc::vocab_mismatch, "discriminator expects input " + nn::to_string(d.input_shape()) +
                                              ", vocabulary gives " + std::to_string(width) + " + 3");
    if (registry.instance_count(editor::method::obfusmal) == 0 || registry.instance_count(editor::method::stealmal) == 0 ||
        registry.instance_count(editor::method::hollowmal) == 0)
        throw error(errc::empty_registry, "every perturbation method needs at least one registered instance");

    nn::adam g_opt({cfg.g_learning_rate});
    nn::adam d_opt({cfg.d_learning_rate});
    detail::loop loop(cfg, malware, benign, registry, det);
    const editor::perturbation_path identity{};
    loop.build_probe_set();
    result.history.warmup_steps = loop.warm_up(d, d_opt);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        epoch_record rec;
        rec.epoch = epoch;
        const auto g_before = g.flat_parameters();
        const auto d_before = d.flat_parameters();

        // Discriminator update.
        {
            auto batch = loop.generate(g, nn::mode::infer);
            std::vector<std::vector<double>> rows;
            std::vector<bool> is_malicious;
            for (auto i : loop.benign_minibatch()) {
                rows.push_back(discriminator_input(benign[i], identity));
                is_malicious.push_back(false);
            }
            for (std::size_t i = 0; i < batch.sample_index.size(); ++i) {
                rows.push_back(discriminator_input(malware[batch.sample_index[i]].features, batch.paths[i]));
                is_malicious.push_back(cfg.labels_malicious(batch.verdicts[i]));
            }
            loop.add_probe_rows(cfg.probe_rows, rows, is_malicious);
            const auto step = discriminator_step(d, d_opt, rows, is_malicious, loop.rng());
            rec.loss_d = step.loss;
            rec.d_accuracy = step.accuracy;
        }

        // Generator update.
        {
            auto batch = loop.generate(g, nn::mode::train);
            const std::size_t rows_n = batch.sample_index.size();
            double det_sum = 0, eva_sum = 0;
            std::size_t eva_n = 0;
            std::vector<std::size_t> kept;
            for (std::size_t i = 0; i < rows_n; ++i) {
                det_sum += detect::detection_rate(batch.verdicts[i]);
                const auto n_orig = loop.original_detections(batch.sample_index[i]);
                if (n_orig > 0) {
                    eva_sum += detect::evasive_rate(n_orig, batch.verdicts[i].n());
                    ++eva_n;
                }
                if (cfg.labels_malicious(batch.verdicts[i]))
                    kept.push_back(i);
            }
            rec.detection_rate = det_sum / static_cast<double>(rows_n);
            rec.evasive_rate = eva_n ? eva_sum / static_cast<double>(eva_n) : nan;

            if (!kept.empty()) {
                std::vector<std::vector<double>> rows;
                for (auto i : kept)
                    rows.push_back(discriminator_input(malware[batch.sample_index[i]].features, batch.paths[i]));
                const auto out = d.forward(stack_rows(rows), nn::mode::infer);
                const auto p = nn::malicious_probability(out);
                rec.loss_g = nn::loss_generator(p) + g.l2_penalty();
                const auto dp = nn::loss_generator_grad(p);
                d.zero_grad();
                const auto dx = d.backward(nn::malicious_probability_grad(dp));
                d.zero_grad();
                nn::tensor dout({rows_n, 3});
                const std::size_t w = dx.dim(1);
                for (std::size_t k = 0; k < kept.size(); ++k)
                    for (std::size_t j = 0; j < 3; ++j)
                        dout[kept[k] * 3 + j] = dx[k * w + (w - 3) + j];
                g.zero_grad();
                g.backward(dout);
                g.add_l2_gradients();
                g_opt.step(g);
            }
        }

        const double g_change = detail::mean_abs_delta(g_before, g.flat_parameters());
        const double d_change = detail::mean_abs_delta(d_before, d.flat_parameters());
        result.history.epochs.push_back(rec);
        result.history.skipped_samples = loop.skipped;
        if (on_epoch)
            on_epoch(rec, g, d);
        if (g_change < cfg.delta && d_change < cfg.delta) {
            result.history.converged = true;
            break;
        }
    }
    return result;
}

/// Per-sample outcome of running a trained Generator over malware.
struct evaluation_row {
    std::size_t sample = 0;
    editor::perturbation_path path;
    detect::verdict original;
    detect::verdict adversarial;
};

/// Generate one example per malware sample (Generator in infer mode, noise
/// from `seed`) and scan both versions.
inline std::vector<evaluation_row> evaluate(nn::net& gen, const std::vector<malware_sample>& malware,
                                            const editor::stub_registry& registry, const detect::detector& det,
                                            std::uint64_t seed, std::uint8_t key = editor::default_key)
{
    std::mt19937_64 rng(seed);
    std::vector<evaluation_row> rows;
    for (std::size_t i = 0; i < malware.size(); ++i) {
        const auto noise = sample_noise(rng);
        auto ex = generate_example(malware[i], gen, noise, registry, key);
        rows.push_back({i, ex.path, det.scan(pe::serialize_pe(malware[i].image)), det.scan(ex.bytes)});
    }
    return rows;
}

struct evaluation_summary {
    double original_detection = nan;
    double adversarial_detection = nan;
    double evasive = nan; // over samples whose original is detected
};

inline evaluation_summary summarize(const std::vector<evaluation_row>& rows)
{
    evaluation_summary s;
    if (rows.empty())
        return s;
    double o = 0, a = 0, e = 0;
    std::size_t en = 0;
    for (const auto& r : rows) {
        o += detect::detection_rate(r.original);
        a += detect::detection_rate(r.adversarial);
        if (r.original.n() > 0) {
            e += detect::evasive_rate(r.original.n(), r.adversarial.n());
            ++en;
        }
    }
    s.original_detection = o / static_cast<double>(rows.size());
    s.adversarial_detection = a / static_cast<double>(rows.size());
    if (en)
        s.evasive = e / static_cast<double>(en);
    return s;
}

} // namespace malfox::train

#endif // MALFOX_TRAINER_HPP
