#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "../support/oracles.hpp"
#include "longtail/metrics.hpp"

using namespace longtail;

namespace {

GeneratedCorpus corpus(std::initializer_list<const char*> lines) {
  std::vector<std::string> v(lines.begin(), lines.end());
  return split_corpus(v);
}

}  // namespace

TEST(Distinct, Examples) {
  EXPECT_EQ(distinct_ngrams(corpus({"a b a b"}), 1), 2u);
  EXPECT_EQ(distinct_ngrams(corpus({"a b a b"}), 2), 2u);
  EXPECT_EQ(distinct_ngrams(GeneratedCorpus{}, 1), 0u);
  EXPECT_EQ(distinct_ngrams(corpus({"a a", "a a"}), 2, 3), 0u);
  EXPECT_EQ(distinct_ngrams(corpus({"a", "b"}), 2), 0u);  // no cross-sentence bigram
  EXPECT_THROW(distinct_ngrams(corpus({"a"}), 3), Error);
}

TEST(Distinct, MatchesOracleAndIgnoresOrder) {
  detail::Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = oracle::random_corpus(rng, 300);
    const Count mf = 1 + rng.bounded(3);
    const auto d1 = distinct_ngrams(c, 1, mf), d2 = distinct_ngrams(c, 2, mf);
    EXPECT_EQ(d1, oracle::distinct(c, 1, mf));
    EXPECT_EQ(d2, oracle::distinct(c, 2, mf));
    rng.shuffle(std::span<std::vector<std::string>>(c));
    EXPECT_EQ(distinct_ngrams(c, 1, mf), d1);
    EXPECT_EQ(distinct_ngrams(c, 2, mf), d2);
  }
}

TEST(SentenceDiversity, Examples) {
  const auto d = sentence_diversity(corpus({"ok", "ok", "yes"}), 5);
  EXPECT_EQ(d.distinct, 2u);
  EXPECT_EQ(d.top, (std::vector<SentenceCount>{{"ok", 2}, {"yes", 1}}));
  const auto u = sentence_diversity(corpus({"c", "a", "b"}), 2);
  EXPECT_EQ(u.distinct, 3u);
  EXPECT_EQ(u.top, (std::vector<SentenceCount>{{"a", 1}, {"b", 1}}));
  EXPECT_THROW(sentence_diversity(corpus({"a"}), 0), Error);
}

TEST(SentenceDiversity, MatchesOracle) {
  detail::Rng rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    // Short sentences so repeats are common.
    GeneratedCorpus c;
    for (std::size_t i = 0, n = rng.bounded(60); i < n; ++i) {
      std::vector<std::string> s;
      for (std::size_t j = 0, len = 1 + rng.bounded(2); j < len; ++j) s.push_back("w" + std::to_string(rng.bounded(3)));
      c.push_back(std::move(s));
    }
    const auto got = sentence_diversity(c, 5);
    const auto [distinct, top] = oracle::sentences(c, 5);
    EXPECT_EQ(got.distinct, distinct);
    ASSERT_EQ(got.top.size(), top.size());
    for (std::size_t i = 0; i < top.size(); ++i) {
      EXPECT_EQ(got.top[i].sentence, top[i].first);
      EXPECT_EQ(got.top[i].count, top[i].second);
    }
  }
}

TEST(Informativeness, Examples) {
  PosLexicon lex;
  lex.add("dog", PosTag::NN);
  lex.add("run", PosTag::VB);
  lex.add_suffix_rule("ing", PosTag::VB);
  const auto r = informativeness(corpus({"the dog can run"}), lex);
  EXPECT_EQ(r.nn_count, 1u);
  EXPECT_EQ(r.vb_count, 1u);
  EXPECT_EQ(r.entity_count, 2u);
  EXPECT_DOUBLE_EQ(r.avg_len, 4.0);
  EXPECT_EQ(informativeness(corpus({"the a of"}), lex).entity_count, 0u);
  EXPECT_EQ(informativeness(corpus({"jogging"}), lex).vb_count, 1u);
  const auto empty = informativeness(GeneratedCorpus{}, lex);
  EXPECT_EQ(empty.entity_count, 0u);
  EXPECT_DOUBLE_EQ(empty.avg_len, 0.0);
}

TEST(Informativeness, MatchesOracle) {
  detail::Rng rng(71);
  const auto lex = oracle::lexicon();
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = oracle::random_corpus(rng, 300);
    Count nn = 0, vb = 0, tokens = 0;
    for (const auto& s : c)
      for (const auto& w : s) {
        const auto t = oracle::tag_of(w);
        nn += t == "NN";
        vb += t == "VB";
        ++tokens;
      }
    const auto r = informativeness(c, lex);
    EXPECT_EQ(r.nn_count, nn);
    EXPECT_EQ(r.vb_count, vb);
    EXPECT_EQ(r.entity_count, r.nn_count + r.vb_count);
    if (!c.empty()) {
      EXPECT_DOUBLE_EQ(r.avg_len, static_cast<double>(tokens) / static_cast<double>(c.size()));
    }
  }
}

TEST(PosLexiconFile, ParsesSectionsAndReportsErrors) {
  std::istringstream in("dog\tNN\nran\tVBD\nthe\tOTHER\n\n#SUFFIX\ning\tVBG\nness\tNN\n");
  const auto lex = load_pos_lexicon(in);
  EXPECT_EQ(lex.tag("dog"), PosTag::NN);
  EXPECT_EQ(lex.tag("ran"), PosTag::VB);
  EXPECT_EQ(lex.tag("the"), PosTag::OTHER);
  EXPECT_EQ(lex.tag("singing"), PosTag::VB);
  EXPECT_EQ(lex.tag("ing"), PosTag::OTHER);
  EXPECT_EQ(lex.tag("kindness"), PosTag::NN);
  EXPECT_EQ(lex.tag("zebra"), PosTag::OTHER);
  std::istringstream bad("dog\tNN\ncat\tJJ\n");
  try {
    load_pos_lexicon(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(WordEntropy, Examples) {
  EXPECT_DOUBLE_EQ(word_entropy(corpus({"a b c d"})), 2.0);
  EXPECT_DOUBLE_EQ(word_entropy(corpus({"a a", "a"})), 0.0);
  EXPECT_DOUBLE_EQ(word_entropy(corpus({"a a b c"})), 1.5);
  EXPECT_THROW(word_entropy(GeneratedCorpus{}), Error);
  EXPECT_THROW(word_entropy(corpus({""})), Error);
}

TEST(WordEntropy, PropertiesOnRandomCorpora) {
  detail::Rng rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = oracle::random_corpus(rng, 300);
    if (c.empty()) continue;
    const double h = word_entropy(c);
    EXPECT_NEAR(h, oracle::entropy(c), 1e-12);
    const auto v = static_cast<double>(distinct_ngrams(c, 1));
    EXPECT_LE(h, std::log2(v) + 1e-12);
    auto twice = c;
    twice.insert(twice.end(), c.begin(), c.end());
    EXPECT_NEAR(word_entropy(twice), h, 1e-12);
  }
  EXPECT_NEAR(word_entropy(corpus({"a b", "c d e"})), std::log2(5.0), 1e-12);
}

TEST(Bleu, HandExample) {
  EXPECT_NEAR(corpus_bleu(corpus({"a b c d"}), corpus({"a b c e"})), 0.5946035575013605, 1e-9);
}

TEST(Bleu, IdentityAndBounds) {
  EXPECT_DOUBLE_EQ(corpus_bleu(corpus({"a b c d e", "x y"}), corpus({"a b c d e", "x y"})), 1.0);
  EXPECT_DOUBLE_EQ(corpus_bleu(corpus({"hi"}), corpus({"hi"})), 1.0);
  EXPECT_LT(corpus_bleu(corpus({"a b c d"}), corpus({"e f g h"})), 0.05);
  detail::Rng rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    auto h = oracle::random_corpus(rng, 200);
    std::erase_if(h, [](const auto& s) { return s.empty(); });
    if (h.empty()) continue;
    EXPECT_DOUBLE_EQ(corpus_bleu(h, h), 1.0);
    auto r = h;
    rng.shuffle(std::span<std::vector<std::string>>(r));
    const double b = corpus_bleu(h, r);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
  }
}

TEST(Bleu, BrevityPenaltyAndErrors) {
  // Perfect precision on every order, half the reference length.
  const double b = corpus_bleu(corpus({"a b c d"}), corpus({"a b c d e f g h"}));
  EXPECT_NEAR(b, std::exp(1.0 - 2.0), 1e-12);
  EXPECT_THROW(corpus_bleu(corpus({"a"}), corpus({"a", "b"})), Error);
  EXPECT_THROW(corpus_bleu(corpus({"a"}), corpus({""})), Error);
}

TEST(BigramReport, Examples) {
  const auto c = corpus({"to go", "to go", "to be"});
  const std::vector<std::string> words{"to", "absent"};
  const auto r = bigram_report(c, words, 1);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].second, 1u);
  EXPECT_EQ(r.rows[1].second, 0u);
  EXPECT_EQ(r.sum, 1u);
  EXPECT_THROW(bigram_report(c, words, 0), Error);
}

TEST(BigramReport, MatchesOracle) {
  detail::Rng rng(83);
  const std::vector<std::string> words{"w0", "w1", "w4", "running", "missing"};
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = oracle::random_corpus(rng, 800);
    const Count mf = 1 + rng.bounded(5);
    const auto r = bigram_report(c, words, mf);
    const auto expected = oracle::bigrams_from(c, words, mf);
    std::size_t sum = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
      EXPECT_EQ(r.rows[i].second, expected[i]);
      sum += expected[i];
    }
    EXPECT_EQ(r.sum, sum);
  }
}

TEST(Report, TsvFieldsFollowOptions) {
  const auto c = corpus({"ok", "ok", "yes"});
  std::ostringstream plain;
  write_report_tsv(evaluate(c), plain);
  EXPECT_EQ(plain.str(),
            "sentences\t3\ndistinct_unigrams\t2\ndistinct_bigrams\t0\ndistinct_sentences\t2\n"
            "top5_1_sentence\tok\ntop5_1_count\t2\ntop5_2_sentence\tyes\ntop5_2_count\t1\n"
            "top5_total\t3\navg_len\t1\nword_entropy_bits\t0.9182958340544896\n");

  PosLexicon lex;
  lex.add("ok", PosTag::NN);
  EvalOptions opt;
  opt.references = &c;
  opt.lexicon = &lex;
  opt.bigram_start_words = {"ok"};
  std::ostringstream full;
  write_report_tsv(evaluate(c, opt), full);
  const auto s = full.str();
  EXPECT_NE(s.find("bleu\t1\n"), std::string::npos);
  EXPECT_NE(s.find("nn_count\t2\n"), std::string::npos);
  EXPECT_NE(s.find("entity_count\t2\n"), std::string::npos);
  EXPECT_NE(s.find("bigrams_from_ok\t0\nbigrams_from_sum\t0\n"), std::string::npos);

  std::ostringstream pretty;
  write_report_pretty(evaluate(c), pretty);
  EXPECT_NE(pretty.str().find("top5_total"), std::string::npos);
}
