// Counts a tiny corpus, builds an LMN table and reweights one model row.

#include <cstdio>
#include <string>
#include <vector>

#include "longtail/ngram_stats.hpp"
#include "longtail/normalization.hpp"

int main() {
  using namespace longtail;
  const std::vector<std::string> lines{"the cat sat", "the dog sat", "the cat ran", "a dog ran"};

  TokenCounter counter;
  std::vector<std::vector<std::string>> tokens;
  for (const auto& l : lines) {
    tokens.push_back(tokenize(l, TokenizerConfig{}));
    counter.add_all(tokens.back());
  }
  const Vocabulary vocab = build_vocab(counter, /*min_freq=*/1);
  std::vector<TokenSequence> corpus;
  for (const auto& t : tokens) corpus.push_back(encode(t, vocab));

  const FreqTable freq = count_ngrams(corpus, vocab);
  const NormTable table = build_norm_table(freq, NormConfig::for_method(NormMethod::LMN));

  const TokenId the = vocab.lookup("the");
  std::vector<double> p_hat(vocab.size(), 1.0 / static_cast<double>(vocab.size()));
  const auto p_norm = apply_norm(p_hat, the, table);
  for (TokenId id = 0; id < vocab.size(); ++id)
    std::printf("%-8s count(the,%s)=%llu  p_hat=%.3f  p'=%.3f\n", vocab.token(id).c_str(), vocab.token(id).c_str(),
                static_cast<unsigned long long>(freq.bigram(the, id)), p_hat[id], p_norm[id]);
}
