#include <malfox_cli.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <unistd.h>

using namespace malfox;
namespace fs = std::filesystem;

namespace {

struct outcome {
    int code;
    std::string out;
    std::string err;
};

outcome run(std::vector<std::string> args)
{
    args.insert(args.begin(), "malfox");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

struct cli_fixture : ::testing::Test {
    static void SetUpTestSuite()
    {
        root = new fs::path(fs::temp_directory_path() / ("malfox_cli_" + std::to_string(::getpid())));
        fs::remove_all(*root);
        const auto r = run({"synth", "--out", corpus().string(), "--seed", "7"});
        ASSERT_EQ(r.code, 0) << r.err;
        write_text_file(corpus() / "small.kv", "minibatch = 8\nmax_epochs = 2\nwarmup_steps = 20\n");
        write_text_file(corpus() / "small_run.kv", "dataset = dataset.tsv\nvocab = vocab.txt\nregistry = registry.tsv\n"
                                                   "ensemble = ensemble.kv\ntrain = small.kv\nseed = 3\n");
    }

    static void TearDownTestSuite()
    {
        fs::remove_all(*root);
        delete root;
    }

    static fs::path corpus() { return *root / "corpus"; }
    static fs::path sample(const std::string& id) { return corpus() / "samples" / (id + ".exe"); }

    static inline fs::path* root = nullptr;
};

} // namespace

TEST(Cli, NoCommandIsUsage)
{
    EXPECT_EQ(run({}).code, cli::usage);
    EXPECT_EQ(run({"bogus"}).code, cli::usage);
}

TEST(Cli, SampleId)
{
    EXPECT_EQ(cli::sample_id("dir/mal3.exe"), "mal3");
    EXPECT_EQ(cli::sample_id("mal3.adv.exe"), "mal3");
    EXPECT_EQ(cli::sample_id("a b.exe"), "a_b");
}

TEST(Cli, ParseKey)
{
    EXPECT_EQ(cli::parse_key("15"), 0x15);
    EXPECT_EQ(cli::parse_key("0xff"), 0xff);
    EXPECT_THROW(cli::parse_key("100"), cli::exit_request);
    EXPECT_THROW(cli::parse_key("zz"), cli::exit_request);
}

TEST_F(cli_fixture, SynthWritesManifests)
{
    for (const char* f : {"dataset.tsv", "registry.tsv", "vocab.txt", "ensemble.kv", "train.kv", "run.kv"})
        EXPECT_TRUE(fs::is_regular_file(corpus() / f)) << f;
    EXPECT_EQ(lines(read_text_file(corpus() / "dataset.tsv")).size(), 200u);
    EXPECT_EQ(pe::vocabulary::from_text(read_text_file(corpus() / "vocab.txt")).size(), 64u);
}

TEST_F(cli_fixture, ParseExitCodes)
{
    const auto good = run({"parse", sample("mal0").string()});
    EXPECT_EQ(good.code, cli::ok) << good.err;
    EXPECT_NE(good.out.find("format PE32\n"), std::string::npos);
    EXPECT_NE(good.out.find("sections 3\n"), std::string::npos);

    const auto bytes = read_file(sample("mal0"));
    const auto cut = *root / "truncated.exe";
    write_file(cut, byte_vector(bytes.begin(), bytes.begin() + 40));
    EXPECT_EQ(run({"parse", cut.string()}).code, cli::usage);
    EXPECT_EQ(run({"parse", corpus().string()}).code, cli::usage);
    EXPECT_EQ(run({"parse", (*root / "missing.exe").string()}).code, cli::usage);
}

TEST_F(cli_fixture, Features)
{
    const auto dir = *root / "features";
    const auto a = run({"features", sample("mal0").string(), sample("ben0").string(), "--out", dir.string()});
    ASSERT_EQ(a.code, cli::ok) << a.err;
    const auto first = read_text_file(dir / "features.txt");
    const auto ff = pe::feature_file::from_text(first);
    EXPECT_EQ(ff.rows.size(), 2u);
    EXPECT_EQ(ff.rows[0].first, "mal0");
    EXPECT_EQ(ff.rows[1].first, "ben0");

    const auto b = run({"features", sample("mal0").string(), sample("ben0").string(), "--out", dir.string()});
    ASSERT_EQ(b.code, cli::ok);
    EXPECT_EQ(read_text_file(dir / "features.txt"), first);

    const auto shared = run({"features", sample("mal1").string(), "--vocab", (corpus() / "vocab.txt").string(),
                             "--out", dir.string()});
    ASSERT_EQ(shared.code, cli::ok);
    EXPECT_EQ(pe::feature_file::from_text(read_text_file(dir / "features.txt")).length, 64u);

    EXPECT_EQ(run({"features", "--out", dir.string()}).code, cli::usage);
    const auto partial = run({"features", sample("mal0").string(), (*root / "nope.exe").string(), "--out", dir.string()});
    EXPECT_EQ(partial.code, cli::partial);
}

TEST_F(cli_fixture, PerturbIdentityKeepsBytes)
{
    const auto out = *root / "identity.exe";
    const auto r = run({"perturb", sample("mal0").string(), "--path", "000", "--registry",
                        (corpus() / "registry.tsv").string(), "--out", out.string()});
    ASSERT_EQ(r.code, cli::ok) << r.err;
    EXPECT_EQ(read_file(out), read_file(sample("mal0")));
    EXPECT_TRUE(fs::is_regular_file(out.string() + ".report"));
}

TEST_F(cli_fixture, PerturbReportsMethodsInOrder)
{
    const auto out = *root / "p110.exe";
    const auto r = run({"perturb", sample("mal2").string(), "--path", "110", "--registry",
                        (corpus() / "registry.tsv").string(), "--key", "0x2a", "--out", out.string()});
    ASSERT_EQ(r.code, cli::ok) << r.err;
    EXPECT_NE(r.out.find("path=110\n"), std::string::npos);
    const auto applied = r.out.find("applied=obfusmal:");
    ASSERT_NE(applied, std::string::npos) << r.out;
    EXPECT_NE(r.out.find(",stealmal:", applied), std::string::npos);
    EXPECT_EQ(r.out.find("hollowmal"), std::string::npos);
    EXPECT_NE(read_file(out), read_file(sample("mal2")));
    EXPECT_NO_THROW(pe::parse_pe(read_file(out)));
}

TEST_F(cli_fixture, PerturbRejectsBadPath)
{
    const auto r = run({"perturb", sample("mal0").string(), "--path", "102", "--registry",
                        (corpus() / "registry.tsv").string(), "--out", (*root / "x.exe").string()});
    EXPECT_EQ(r.code, cli::usage);
}

TEST_F(cli_fixture, PerturbEmptyRegistryIsEditorFailure)
{
    const auto reg = *root / "empty_registry.tsv";
    write_text_file(reg, "");
    const auto r = run({"perturb", sample("mal0").string(), "--path", "100", "--registry", reg.string(), "--out",
                        (*root / "y.exe").string()});
    EXPECT_EQ(r.code, cli::editor_failure) << r.err;
}

TEST_F(cli_fixture, TrainGenerateEvaluate)
{
    const auto run_dir = *root / "run";
    const auto t = run({"train", (corpus() / "small_run.kv").string(), "--out", run_dir.string()});
    ASSERT_EQ(t.code, cli::ok) << t.err;
    EXPECT_NE(t.out.find("epochs 2"), std::string::npos) << t.out;
    const auto history = lines(read_text_file(run_dir / "history.csv"));
    ASSERT_EQ(history.size(), 3u);
    EXPECT_EQ(history[0], "epoch,loss_d,loss_g,d_accuracy,detection_rate,evasive_rate");
    EXPECT_NO_THROW(nn::load_checkpoint(read_file(run_dir / "generator.ckpt")));
    EXPECT_NO_THROW(nn::load_checkpoint(read_file(run_dir / "discriminator.ckpt")));

    const auto adv = *root / "adv";
    const auto g = run({"generate", (corpus() / "small_run.kv").string(), "--checkpoint",
                        (run_dir / "generator.ckpt").string(), "--out", adv.string()});
    ASSERT_EQ(g.code, cli::ok) << g.err;
    EXPECT_EQ(lines(g.out).size(), 120u);
    ASSERT_TRUE(fs::is_regular_file(adv / "mal0.adv.exe"));

    // Original verdicts first, then the adversarial files against them.
    const auto orig_dir = *root / "eval_orig";
    const auto o = run({"evaluate", sample("mal0").string(), sample("mal1").string(), "--manifest",
                        (corpus() / "small_run.kv").string(), "--out", orig_dir.string()});
    ASSERT_EQ(o.code, cli::ok) << o.err;
    const auto verdicts = lines(read_text_file(orig_dir / "verdicts.csv"));
    ASSERT_EQ(verdicts.size(), 3u);
    EXPECT_EQ(verdicts[0], "sample_id,e0,e1,e2,e3,e4,n,N");
    EXPECT_EQ(verdicts[1], "mal0,1,1,1,1,1,5,5");

    const auto adv_dir = *root / "eval_adv";
    const auto e = run({"evaluate", (adv / "mal0.adv.exe").string(), (adv / "mal1.adv.exe").string(), "--manifest",
                        (corpus() / "small_run.kv").string(), "--originals", (orig_dir / "verdicts.csv").string(),
                        "--out", adv_dir.string()});
    ASSERT_EQ(e.code, cli::ok) << e.err;
    const auto summary = lines(read_text_file(adv_dir / "summary.csv"));
    ASSERT_EQ(summary.size(), 4u);
    EXPECT_EQ(summary[0], "metric,Average,Max,Min");
    EXPECT_EQ(summary[1].rfind("detection_rate_original,1,1,1", 0), 0u) << summary[1];
    EXPECT_EQ(summary[3].rfind("evasive_rate,", 0), 0u);
    EXPECT_NE(summary[3], "evasive_rate,,,");
}

TEST_F(cli_fixture, EvaluateEvasiveAgainstGivenOriginals)
{
    const auto originals = *root / "orig5.csv";
    write_text_file(originals, "sample_id,n\nhello,5\n");
    const auto hello = *root / "hello.exe";
    write_file(hello, corpus::make_hello_world(42));
    const auto dir = *root / "eval_hello";
    const auto r = run({"evaluate", hello.string(), "--manifest", (corpus() / "small_run.kv").string(), "--originals",
                        originals.string(), "--seed", "1", "--out", dir.string()});
    ASSERT_EQ(r.code, cli::ok) << r.err;
    const auto metrics = lines(read_text_file(dir / "metrics.csv"));
    ASSERT_EQ(metrics.size(), 2u);
    EXPECT_EQ(metrics[1], "hello,0,5,0,5,1");
}

TEST_F(cli_fixture, EvaluateWithoutOriginalsLeavesEvasiveEmpty)
{
    const auto dir = *root / "eval_plain";
    const auto r = run({"evaluate", sample("ben0").string(), "--manifest", (corpus() / "small_run.kv").string(),
                        "--out", dir.string()});
    ASSERT_EQ(r.code, cli::ok) << r.err;
    const auto metrics = lines(read_text_file(dir / "metrics.csv"));
    ASSERT_EQ(metrics.size(), 2u);
    EXPECT_EQ(metrics[1].substr(metrics[1].size() - 2), ",,");
    const auto summary = lines(read_text_file(dir / "summary.csv"));
    EXPECT_EQ(summary.back(), "evasive_rate,,,");
}

TEST_F(cli_fixture, EvaluateNeedsVocab)
{
    const auto r = run({"evaluate", sample("ben0").string(), "--dataset", (corpus() / "dataset.tsv").string(), "--vocab",
                        (*root / "missing_vocab.txt").string(), "--out", (*root / "ev").string()});
    EXPECT_EQ(r.code, cli::usage);
    const auto s = run({"evaluate", sample("ben0").string(), "--out", (*root / "ev").string()});
    EXPECT_EQ(s.code, cli::usage);
}

TEST_F(cli_fixture, TrainMissingManifest)
{
    EXPECT_EQ(run({"train", (*root / "nope.kv").string()}).code, cli::usage);
}
