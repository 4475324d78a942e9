#pragma once

// Synthetic long-tail sentence generator used for desk-scale training runs.
//
// Words are "w0" .. "w{V-1}". The first word of a sentence is drawn from a
// global Zipf law. After every word the sentence ends with probability
// end_prob; otherwise the next word comes from the global law with
// probability global_mix, or from a Zipf law over a word-specific permutation
// of the vocabulary. Both draws are long-tailed, and the mixture makes some
// words frequent everywhere while others are frequent only after particular
// contexts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "longtail/detail/random.hpp"
#include "longtail/error.hpp"

namespace longtail {

struct ZipfCorpusConfig {
  std::size_t vocab_size = 200;
  std::size_t sentences = 50000;
  double exponent = 1.1;
  double end_prob = 0.25;
  double global_mix = 0.5;
  std::size_t max_len = 20;
  std::uint64_t seed = 20240501;
};

namespace detail {

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf_[r] = acc;
    }
    for (auto& c : cdf_) c /= acc;
  }

  // Rank in [0, n).
  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace detail

inline std::vector<std::string> generate_zipf_corpus(const ZipfCorpusConfig& cfg) {
  if (cfg.vocab_size < 2) throw Error("zipf corpus: vocab_size must be >= 2");
  if (!(cfg.end_prob > 0.0 && cfg.end_prob <= 1.0)) throw Error("zipf corpus: end_prob must be in (0, 1]");
  if (!(cfg.global_mix >= 0.0 && cfg.global_mix <= 1.0)) throw Error("zipf corpus: global_mix must be in [0, 1]");
  if (cfg.max_len < 1) throw Error("zipf corpus: max_len must be >= 1");

  detail::Rng rng(cfg.seed, /*stream=*/7);
  const detail::ZipfSampler zipf(cfg.vocab_size, cfg.exponent);

  std::vector<std::vector<std::size_t>> successor_order(cfg.vocab_size);
  for (auto& order : successor_order) {
    order.resize(cfg.vocab_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
  }

  std::vector<std::string> lines;
  lines.reserve(cfg.sentences);
  for (std::size_t s = 0; s < cfg.sentences; ++s) {
    std::string line;
    std::size_t word = zipf.draw(rng);
    for (std::size_t len = 1;; ++len) {
      if (!line.empty()) line += ' ';
      line += 'w';
      line += std::to_string(word);
      if (len >= cfg.max_len || rng.uniform() < cfg.end_prob) break;
      const std::size_t rank = zipf.draw(rng);
      word = rng.uniform() < cfg.global_mix ? rank : successor_order[word][rank];
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace longtail
