#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "longtail/cli.hpp"

using namespace longtail;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("longtail_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
    return path(name);
  }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run_cli(args, out_, err_);
  }

  // Counts `text` with min-freq 1 and returns the table path.
  std::string count(const std::string& text) {
    const auto in = write("corpus.txt", text);
    EXPECT_EQ(run({"count", "--input", in, "--min-freq", "1", "--out", path("freq.tsv")}), 0) << err_.str();
    return path("freq.tsv");
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const std::string kToy = "the cat sat\nthe dog ran\na cat ran\n";

}  // namespace

TEST_F(CliTest, CountMatchesHandEnumeration) {
  const auto freq = count(kToy);
  const auto vocab = cli::detail::read_vocab(freq + ".vocab");
  const auto table = cli::detail::read_table(freq, vocab);
  auto id = [&](const char* w) { return *vocab.find(w); };
  EXPECT_EQ(table.unigram(kBosId), 3u);
  EXPECT_EQ(table.unigram(id("the")), 2u);
  EXPECT_EQ(table.unigram(id("cat")), 2u);
  EXPECT_EQ(table.unigram(id("ran")), 2u);
  EXPECT_EQ(table.bigram(kBosId, id("the")), 2u);
  EXPECT_EQ(table.bigram(id("cat"), id("sat")), 1u);
  EXPECT_EQ(table.bigram(id("cat"), id("ran")), 1u);
  EXPECT_EQ(table.bigram(id("ran"), kEosId), 2u);
  EXPECT_EQ(table.total_tokens(), 15u);
  EXPECT_NE(out_.str().find("total_words\t9\n"), std::string::npos);
  EXPECT_NE(out_.str().find("sentences\t3\n"), std::string::npos);
}

TEST_F(CliTest, CountEdgeCases) {
  const auto freq = count("");
  EXPECT_TRUE(cli::detail::read_table(freq, cli::detail::read_vocab(freq + ".vocab")).empty());
  EXPECT_NE(run({"count", "--input", path("missing.txt"), "--out", path("x.tsv")}), 0);
  EXPECT_NE(err_.str().find("missing.txt"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("x.tsv")));
  EXPECT_NE(run({"count", "--out", path("x.tsv")}), 0);
  write("bad.txt", "ok\n\xff\n");
  EXPECT_NE(run({"count", "--input", path("bad.txt"), "--out", path("x.tsv")}), 0);
  EXPECT_NE(err_.str().find("line 2"), std::string::npos);
}

TEST_F(CliTest, CountIsThreadInvariant) {
  std::string text;
  for (int i = 0; i < 3000; ++i) text += "w" + std::to_string(i % 17) + " w" + std::to_string(i % 5) + " x\n";
  const auto in = write("corpus.txt", text);
  ASSERT_EQ(run({"count", "--input", in, "--out", path("one.tsv")}), 0);
  ASSERT_EQ(run({"count", "--input", in, "--threads", "3", "--out", path("three.tsv")}), 0);
  EXPECT_EQ(read(path("one.tsv")), read(path("three.tsv")));
  EXPECT_EQ(read(path("one.tsv.vocab")), read(path("three.tsv.vocab")));
}

TEST_F(CliTest, NormTableWeightsAndDefaults) {
  const auto freq = count(kToy);
  ASSERT_EQ(run({"norm-table", "--freq", freq, "--method", "ln", "--out", path("ln.tsv")}), 0) << err_.str();
  const auto vocab = cli::detail::read_vocab(freq + ".vocab");
  const auto table = cli::detail::read_table(freq, vocab);
  const auto norm = cli::detail::read_norm_table(path("ln.tsv"), vocab);
  for (const auto& [prev, entries] : norm.rows())
    for (const auto& e : entries) EXPECT_DOUBLE_EQ(e.weight, log_norm(table, prev, e.next));
  EXPECT_NE(read(path("ln.tsv.manifest.tsv")).find("arg.epsilon\t1.1\n"), std::string::npos);

  ASSERT_EQ(run({"norm-table", "--freq", freq, "--method", "mn", "--out", path("mn.tsv")}), 0);
  EXPECT_NE(read(path("mn.tsv.manifest.tsv")).find("arg.epsilon\t0.1\n"), std::string::npos);

  ASSERT_EQ(run({"norm-table", "--freq", freq, "--method", "nonn", "--k", "1", "--out", path("k1.tsv")}), 0);
  const auto top1 = cli::detail::read_norm_table(path("k1.tsv"), vocab);
  for (const auto& [prev, entries] : top1.rows()) EXPECT_EQ(entries.size(), 1u);

  EXPECT_NE(run({"norm-table", "--freq", freq, "--method", "bogus", "--out", path("b.tsv")}), 0);
  EXPECT_NE(err_.str().find("bogus"), std::string::npos);
}

TEST_F(CliTest, NormStats) {
  const auto freq = count("a x\na y\na z\n");
  ASSERT_EQ(run({"norm-stats", "--freq", freq, "--word", "a", "--methods", "ln"}), 0) << err_.str();
  EXPECT_NE(out_.str().find("ln\t1\t0\t3\n"), std::string::npos) << out_.str();
  EXPECT_NE(out_.str().find("rank\tnext\tcount\tln\n"), std::string::npos);

  ASSERT_EQ(run({"norm-stats", "--freq", freq, "--word", "a", "--out", path("stats.tsv")}), 0);
  const auto stats = read(path("stats.tsv"));
  for (const char* m : {"nonn\t", "ln\t", "mn\t", "lmn\t"}) EXPECT_NE(stats.find(m), std::string::npos);

  EXPECT_NE(run({"norm-stats", "--freq", freq, "--word", "nope"}), 0);
  EXPECT_NE(run({"norm-stats", "--freq", freq, "--word", "a", "--methods", "ln,zz"}), 0);
}

TEST_F(CliTest, TrainDeterminismAndModes) {
  const auto freq = count(kToy);
  const std::vector<std::string> base{"train", "--corpus", path("corpus.txt"), "--vocab", freq + ".vocab",
                                      "--lr",  "0.05",     "--batch",          "4",     "--epochs",
                                      "40",    "--dim",    "8",                "--seed", "9"};
  auto with_out = [&](std::vector<std::string> extra, const std::string& out) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("--out");
    args.push_back(path(out));
    return run(args);
  };
  ASSERT_EQ(with_out({}, "a.model"), 0) << err_.str();
  ASSERT_EQ(with_out({}, "b.model"), 0);
  EXPECT_EQ(read(path("a.model.loss.tsv")), read(path("b.model.loss.tsv")));
  EXPECT_EQ(read(path("a.model")), read(path("b.model")));

  // Final epoch loss below the first.
  std::istringstream trace(read(path("a.model.loss.tsv")));
  std::string line;
  std::vector<double> losses;
  std::getline(trace, line);
  while (std::getline(trace, line)) losses.push_back(std::stod(line.substr(line.find('\t') + 1)));
  ASSERT_EQ(losses.size(), 40u);
  EXPECT_LT(losses.back(), losses.front());

  // A table without rows is the identity.
  const auto vocab = cli::detail::read_vocab(freq + ".vocab");
  write("identity.tsv", "#NORMTABLE v1 nonn 200 0 1 " + longtail::detail::hex64(vocab.fingerprint()) + "\n");
  ASSERT_EQ(with_out({"--loss", "normalized", "--norm-table", path("identity.tsv")}, "id.model"), 0) << err_.str();
  EXPECT_EQ(read(path("a.model.loss.tsv")), read(path("id.model.loss.tsv")));

  EXPECT_NE(with_out({"--loss", "normalized"}, "x.model"), 0);
  EXPECT_NE(err_.str().find("--norm-table"), std::string::npos);
  EXPECT_NE(with_out({"--loss", "weird"}, "x.model"), 0);
}

TEST_F(CliTest, GenerateRespectsLimitsAndIsDeterministic) {
  const auto freq = count(kToy);
  ASSERT_EQ(run({"train", "--corpus", path("corpus.txt"), "--vocab", freq + ".vocab", "--lr", "0.05", "--batch", "4",
                 "--epochs", "20", "--dim", "8", "--out", path("m")}),
            0);
  write("prompts.txt", "\nthe\ncat\nunseen words here\n");
  for (const char* strategy : {"greedy", "sample"}) {
    const std::vector<std::string> args{"generate", "--model",   path("m"), "--prompts", path("prompts.txt"),
                                        "--strategy", strategy, "--max-len", "2", "--seed", "4"};
    auto a = args, b = args;
    a.insert(a.end(), {"--out", path("g1.txt")});
    b.insert(b.end(), {"--out", path("g2.txt")});
    ASSERT_EQ(run(a), 0) << err_.str();
    ASSERT_EQ(run(b), 0);
    const auto text = read(path("g1.txt"));
    EXPECT_EQ(text, read(path("g2.txt")));
    std::istringstream lines(text);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      ++n;
      EXPECT_LE(longtail::detail::split_ws(line).size(), 2u);
    }
    EXPECT_EQ(n, 4);
  }
  EXPECT_NE(run({"generate", "--model", path("nomodel"), "--prompts", path("prompts.txt"), "--out", path("g.txt")}),
            0);
}

TEST_F(CliTest, Eval) {
  const auto gen = write("gen.txt", "a b c\na b\n");
  ASSERT_EQ(run({"eval", "--generated", gen, "--references", gen}), 0) << err_.str();
  EXPECT_NE(out_.str().find("bleu\t1\n"), std::string::npos);
  ASSERT_EQ(run({"eval", "--generated", gen}), 0);
  EXPECT_EQ(out_.str().find("bleu"), std::string::npos);
  EXPECT_NE(out_.str().find("distinct_bigrams\t2\n"), std::string::npos);

  write("lex.tsv", "a\tNN\nb\tVB\n");
  ASSERT_EQ(run({"eval", "--generated", gen, "--pos-lexicon", path("lex.tsv"), "--bigram-words", "a,b",
                 "--bigram-min-freq", "1", "--out", path("report.tsv")}),
            0);
  const auto report = read(path("report.tsv"));
  EXPECT_NE(report.find("nn_count\t2\nvb_count\t2\nentity_count\t4\n"), std::string::npos);
  EXPECT_NE(report.find("bigrams_from_a\t1\nbigrams_from_b\t0\nbigrams_from_sum\t1\n"), std::string::npos);

  const auto ref = write("ref.txt", "a b c\n");
  EXPECT_NE(run({"eval", "--generated", gen, "--references", ref}), 0);
}

TEST_F(CliTest, ReplayReproducesOutputs) {
  ASSERT_EQ(run({"synth", "--sentences", "300", "--vocab-size", "30", "--out", path("s.txt")}), 0);
  const auto corpus = read(path("s.txt"));
  fs::remove(path("s.txt"));
  ASSERT_EQ(run({"replay", "--manifest", path("s.txt.manifest.tsv")}), 0) << err_.str();
  EXPECT_EQ(read(path("s.txt")), corpus);

  ASSERT_EQ(run({"count", "--input", path("s.txt"), "--min-freq", "2", "--lowercase", "--out", path("f.tsv")}), 0);
  const auto table = read(path("f.tsv"));
  const auto manifest = read(path("f.tsv.manifest.tsv"));
  EXPECT_NE(manifest.find("subcommand\tcount\n"), std::string::npos);
  EXPECT_NE(manifest.find("flag.lowercase\t1\n"), std::string::npos);
  EXPECT_NE(manifest.find("arg.vocab-out\t" + path("f.tsv.vocab") + "\n"), std::string::npos);
  EXPECT_NE(manifest.find("duration_seconds\t"), std::string::npos);
  fs::remove(path("f.tsv"));
  ASSERT_EQ(run({"replay", "--manifest", path("f.tsv.manifest.tsv")}), 0);
  EXPECT_EQ(read(path("f.tsv")), table);

  write("bad.manifest.tsv", "subcommand\tcount\narg.nope\t1\n");
  EXPECT_NE(run({"replay", "--manifest", path("bad.manifest.tsv")}), 0);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_NE(run({}), 0);
  EXPECT_NE(run({"frobnicate"}), 0);
  EXPECT_EQ(run({"--help"}), 0);
}
