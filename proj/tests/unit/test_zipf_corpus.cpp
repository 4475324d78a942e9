#include <gtest/gtest.h>

#include <map>

#include "longtail/detail/text.hpp"
#include "longtail/zipf_corpus.hpp"

using namespace longtail;

TEST(ZipfCorpus, DeterministicAndWellFormed) {
  ZipfCorpusConfig cfg;
  cfg.sentences = 2000;
  const auto a = generate_zipf_corpus(cfg);
  EXPECT_EQ(a, generate_zipf_corpus(cfg));
  ASSERT_EQ(a.size(), 2000u);
  for (const auto& line : a) {
    const auto toks = detail::split_ws(line);
    ASSERT_GE(toks.size(), 1u);
    ASSERT_LE(toks.size(), cfg.max_len);
    for (auto t : toks) {
      ASSERT_EQ(t[0], 'w');
      EXPECT_LT(std::stoul(std::string(t.substr(1))), cfg.vocab_size);
    }
  }
  cfg.seed += 1;
  EXPECT_NE(a, generate_zipf_corpus(cfg));
}

TEST(ZipfCorpus, FrequenciesAreLongTailed) {
  ZipfCorpusConfig cfg;
  cfg.sentences = 5000;
  std::map<std::string, int> freq;
  for (const auto& line : generate_zipf_corpus(cfg))
    for (auto t : detail::split_ws(line)) ++freq[std::string(t)];
  std::vector<int> counts;
  for (const auto& [w, c] : freq) counts.push_back(c);
  std::sort(counts.rbegin(), counts.rend());
  ASSERT_GT(counts.size(), 100u);
  EXPECT_GT(counts[0], 10 * counts[99]);
}

TEST(ZipfCorpus, RejectsBadConfig) {
  ZipfCorpusConfig cfg;
  cfg.vocab_size = 1;
  EXPECT_THROW(generate_zipf_corpus(cfg), Error);
  cfg = {};
  cfg.end_prob = 0.0;
  EXPECT_THROW(generate_zipf_corpus(cfg), Error);
}
