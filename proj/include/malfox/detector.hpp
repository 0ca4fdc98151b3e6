#ifndef MALFOX_DETECTOR_HPP
#define MALFOX_DETECTOR_HPP

#include <malfox/bytes.hpp>
#include <malfox/csv.hpp>
#include <malfox/error.hpp>
#include <malfox/kv.hpp>
#include <malfox/pe_model.hpp>
#include <malfox/pe_parser.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace malfox::detect {

struct verdict {
    std::vector<std::uint8_t> entity_flags; // 1 = flagged malicious

    std::size_t n() const noexcept
    {
        return static_cast<std::size_t>(std::count(entity_flags.begin(), entity_flags.end(), std::uint8_t{1}));
    }
    std::size_t entity_count() const noexcept { return entity_flags.size(); }
    bool malicious() const noexcept { return n() > 0; }

    bool operator==(const verdict&) const = default;
};

/// Black-box scanner: bytes in, per-entity verdict out. Implementations that
/// cannot answer throw DetectorUnavailable.
class detector {
public:
    virtual ~detector() = default;
    virtual verdict scan(byte_span file) const = 0;
};

/// Accuracy = a / A.
inline double accuracy(std::size_t a, std::size_t total)
{
    if (total == 0)
        throw error(errc::division_by_zero, "accuracy over zero predictions");
    if (a > total)
        throw error(errc::domain_error, "more correct predictions than predictions");
    return static_cast<double>(a) / static_cast<double>(total);
}

/// Detection rate = n / N.
inline double detection_rate(const verdict& v)
{
    if (v.entity_count() == 0)
        throw error(errc::division_by_zero, "verdict without entities");
    return static_cast<double>(v.n()) / static_cast<double>(v.entity_count());
}

/// Evasive rate = (n_orig - n_adv) / n_orig; negative when the adversarial
/// example is flagged by more entities.
inline double evasive_rate(std::size_t n_orig, std::size_t n_adv)
{
    if (n_orig == 0)
        throw error(errc::undefined_for_undetected, "the original sample is not detected by any entity");
    return (static_cast<double>(n_orig) - static_cast<double>(n_adv)) / static_cast<double>(n_orig);
}

/// Shannon entropy (bits per byte) of one histogram over all executable sections.
inline double executable_entropy(const pe::pe_image& img)
{
    std::array<std::uint64_t, 256> hist{};
    std::uint64_t total = 0;
    for (const auto& s : img.sections) {
        if (!s.header.is_executable())
            continue;
        for (auto b : s.data)
            ++hist[b];
        total += s.data.size();
    }
    if (total == 0)
        return 0.0;
    double h = 0;
    for (auto c : hist) {
        if (c == 0)
            continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

struct sim_ensemble_config {
    std::size_t entity_count = 5;
    std::uint64_t seed = 1;
    double blocklist_coverage = 1.0; // fraction of designated-malicious hashes each entity blocks
    double feature_fraction = 0.5;   // share of the vocabulary each entity's linear model sees
    double entropy_threshold = 7.2;  // bits per byte
    double entropy_jitter = 0.1;     // per-entity uniform offset in [-jitter, +jitter]
    std::size_t perceptron_epochs = 50;

    /// Keys: entities, seed, blocklist_coverage, feature_fraction,
    /// entropy_threshold, entropy_jitter, perceptron_epochs.
    static sim_ensemble_config from_kv(const kv_document& doc)
    {
        sim_ensemble_config c;
        c.entity_count = doc.get_int<std::size_t>("entities", c.entity_count);
        c.seed = doc.get_int<std::uint64_t>("seed", c.seed);
        c.blocklist_coverage = doc.get_double("blocklist_coverage", c.blocklist_coverage);
        c.feature_fraction = doc.get_double("feature_fraction", c.feature_fraction);
        c.entropy_threshold = doc.get_double("entropy_threshold", c.entropy_threshold);
        c.entropy_jitter = doc.get_double("entropy_jitter", c.entropy_jitter);
        c.perceptron_epochs = doc.get_int<std::size_t>("perceptron_epochs", c.perceptron_epochs);
        c.validate();
        return c;
    }

    void validate() const
    {
        if (entity_count == 0)
            throw error(errc::config_invalid, "ensemble needs at least one entity");
        if (!(blocklist_coverage >= 0 && blocklist_coverage <= 1))
            throw error(errc::config_invalid, "blocklist_coverage must be in [0, 1]");
        if (!(feature_fraction > 0 && feature_fraction <= 1))
            throw error(errc::config_invalid, "feature_fraction must be in (0, 1]");
        if (!std::isfinite(entropy_threshold) || !std::isfinite(entropy_jitter) || entropy_jitter < 0)
            throw error(errc::config_invalid, "entropy threshold and jitter must be finite");
    }
};

/// Designated training corpus for the ensemble: raw files plus labels.
struct labelled_file {
    byte_vector bytes;
    bool malicious = false;
};

struct sim_entity {
    std::set<std::string> blocklist;   // SHA-256 hex
    std::vector<std::size_t> features; // vocabulary indices seen by the linear model
    std::vector<double> weights;       // one per entry of `features`
    double bias = 0;
    double entropy_threshold = 7.2;

    bool hash_fires(const std::string& hash) const { return blocklist.count(hash) > 0; }

    bool linear_fires(const pe::feature_vector& fv) const
    {
        double s = bias;
        for (std::size_t k = 0; k < features.size(); ++k)
            s += weights[k] * fv.bits[features[k]];
        return s > 0;
    }

    bool entropy_fires(double entropy) const { return entropy > entropy_threshold; }
};

/// N simulated scanning entities. Each flags a file when its hash is
/// blocklisted, its linear model scores the import features positive, or the
/// executable sections' byte entropy exceeds its threshold. Files that do not
/// parse are flagged by every entity.
class sim_ensemble final : public detector {
public:
    static sim_ensemble build(const sim_ensemble_config& cfg, pe::vocabulary vocab,
                              const std::vector<labelled_file>& corpus)
    {
        cfg.validate();
        if (vocab.size() == 0)
            throw error(errc::config_invalid, "ensemble vocabulary is empty");
        sim_ensemble ens;
        ens.vocab_ = std::move(vocab);
        std::mt19937_64 rng(cfg.seed);

        std::vector<std::string> bad_hashes;
        std::vector<pe::feature_vector> xs;
        std::vector<int> ys;
        for (const auto& f : corpus) {
            if (f.malicious)
                bad_hashes.push_back(sha256_hex(f.bytes));
            xs.push_back(pe::vectorize(pe::extract_features(pe::parse_pe(f.bytes)), ens.vocab_));
            ys.push_back(f.malicious ? 1 : -1);
        }

        const std::size_t width = ens.vocab_.size();
        const auto subset_size = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg.feature_fraction * static_cast<double>(width))));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t e = 0; e < cfg.entity_count; ++e) {
            sim_entity ent;
            for (const auto& h : bad_hashes)
                if (cfg.blocklist_coverage >= 1.0 || unit(rng) < cfg.blocklist_coverage)
                    ent.blocklist.insert(h);

            std::vector<std::size_t> all(width);
            std::iota(all.begin(), all.end(), std::size_t{0});
            std::shuffle(all.begin(), all.end(), rng);
            ent.features.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(subset_size));
            std::sort(ent.features.begin(), ent.features.end());
            ent.weights.assign(ent.features.size(), 0.0);
            train_perceptron(ent, xs, ys, cfg.perceptron_epochs, rng);

            ent.entropy_threshold = cfg.entropy_threshold + (2.0 * unit(rng) - 1.0) * cfg.entropy_jitter;
            ens.entities_.push_back(std::move(ent));
        }
        return ens;
    }

    verdict scan(byte_span file) const override
    {
        verdict v;
        v.entity_flags.assign(entities_.size(), 0);
        pe::pe_image img;
        pe::feature_vector fv;
        try {
            img = pe::parse_pe(file);
            fv = pe::vectorize(pe::extract_features(img), vocab_);
        } catch (const error&) {
            std::fill(v.entity_flags.begin(), v.entity_flags.end(), std::uint8_t{1});
            return v;
        }
        const auto hash = sha256_hex(file);
        const double entropy = executable_entropy(img);
        for (std::size_t e = 0; e < entities_.size(); ++e) {
            const auto& ent = entities_[e];
            v.entity_flags[e] = ent.hash_fires(hash) || ent.linear_fires(fv) || ent.entropy_fires(entropy) ? 1 : 0;
        }
        return v;
    }

    /// Add a hash to every entity's blocklist.
    void block(const std::string& sha256)
    {
        for (auto& e : entities_)
            e.blocklist.insert(sha256);
    }

    std::size_t entity_count() const noexcept { return entities_.size(); }
    const std::vector<sim_entity>& entities() const noexcept { return entities_; }
    const pe::vocabulary& vocab() const noexcept { return vocab_; }

private:
    static void train_perceptron(sim_entity& ent, const std::vector<pe::feature_vector>& xs, const std::vector<int>& ys,
                                 std::size_t epochs, std::mt19937_64& rng)
    {
        std::vector<std::size_t> order(xs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t ep = 0; ep < epochs; ++ep) {
            std::shuffle(order.begin(), order.end(), rng);
            std::size_t mistakes = 0;
            for (auto i : order) {
                const int predicted = ent.linear_fires(xs[i]) ? 1 : -1;
                if (predicted == ys[i])
                    continue;
                ++mistakes;
                ent.bias += ys[i];
                for (std::size_t k = 0; k < ent.features.size(); ++k)
                    ent.weights[k] += ys[i] * static_cast<double>(xs[i].bits[ent.features[k]]);
            }
            if (mistakes == 0)
                break;
        }
    }

    pe::vocabulary vocab_;
    std::vector<sim_entity> entities_;
};

/// CSV: sample_id, e0..e{N-1}, n, N.
inline std::string verdicts_to_csv(const std::vector<std::pair<std::string, verdict>>& rows)
{
    std::size_t width = 0;
    for (const auto& [id, v] : rows)
        width = std::max(width, v.entity_count());
    std::ostringstream os;
    os << "sample_id";
    for (std::size_t e = 0; e < width; ++e)
        os << ",e" << e;
    os << ",n,N\n";
    for (const auto& [id, v] : rows) {
        os << csv_field(id);
        for (std::size_t e = 0; e < width; ++e) {
            os << ',';
            if (e < v.entity_count())
                os << int{v.entity_flags[e]};
        }
        os << ',' << v.n() << ',' << v.entity_count() << '\n';
    }
    return os.str();
}

} // namespace malfox::detect

#endif // MALFOX_DETECTOR_HPP
