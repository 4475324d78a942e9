#pragma once

// Frequency-based long-tail normalization of next-token distributions.
//
// Four weightings of a bigram (a, b), all landing in [0, 1]:
//   NonN  Freq(a,b) / Max_v
//   LN    log(Freq(a,b) + eps) / log(Max_v + eps)          eps = 1.1
//   MN    Freq(a,b) / (Freq(b) + eps)                      eps = 0.1
//   LMN   log(Freq(a,b) + eps) / log(Freq(b) + eps)        eps = 1.1
// where Max_v is the largest successor count of a. Weights for the top-K
// successors of each context are precomputed into a NormTable and applied to a
// model distribution by multiplicative reweighting followed by renormalization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "longtail/corpus.hpp"
#include "longtail/detail/text.hpp"
#include "longtail/error.hpp"
#include "longtail/ngram_stats.hpp"

namespace longtail {

enum class NormMethod { NonN, LN, MN, LMN };

inline constexpr NormMethod kAllNormMethods[] = {NormMethod::NonN, NormMethod::LN, NormMethod::MN, NormMethod::LMN};

inline std::string_view to_string(NormMethod m) {
  switch (m) {
    case NormMethod::NonN: return "nonn";
    case NormMethod::LN: return "ln";
    case NormMethod::MN: return "mn";
    case NormMethod::LMN: return "lmn";
  }
  return "?";
}

inline std::optional<NormMethod> parse_norm_method(std::string_view s) {
  for (auto m : kAllNormMethods)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

inline constexpr double kLogSmoothing = 1.1;
inline constexpr double kMutualSmoothing = 0.1;

inline double default_epsilon(NormMethod m) {
  switch (m) {
    case NormMethod::LN:
    case NormMethod::LMN: return kLogSmoothing;
    case NormMethod::MN: return kMutualSmoothing;
    case NormMethod::NonN: return 0.0;
  }
  return 0.0;
}

struct NormConfig {
  NormMethod method = NormMethod::LMN;
  std::size_t k = kDefaultTopK;
  double epsilon = kLogSmoothing;
  double default_weight = 1.0;  // for successors outside the top-K table

  static NormConfig for_method(NormMethod m, std::size_t k = kDefaultTopK) {
    return {m, k, default_epsilon(m), 1.0};
  }

  void validate() const {
    if (k < 1) throw Error("norm config: k must be >= 1");
    if (!(default_weight > 0.0 && default_weight <= 1.0))
      throw Error("norm config: default_weight must be in (0, 1]");
    if (!std::isfinite(epsilon)) throw Error("norm config: epsilon must be finite");
    if (method == NormMethod::MN && !(epsilon > 0.0)) throw Error("norm config: MN needs epsilon > 0");
    if ((method == NormMethod::LN || method == NormMethod::LMN) && !(epsilon > 1.0))
      throw Error("norm config: LN/LMN need epsilon > 1");
  }

  friend bool operator==(const NormConfig&, const NormConfig&) = default;
};

// Count-level formulas.

inline double log_norm_weight(Count bigram, Count max_successor, double eps) {
  return std::log(static_cast<double>(bigram) + eps) / std::log(static_cast<double>(max_successor) + eps);
}

inline double mutual_norm_weight(Count bigram, Count unigram_next, double eps) {
  return static_cast<double>(bigram) / (static_cast<double>(unigram_next) + eps);
}

inline double log_mutual_norm_weight(Count bigram, Count unigram_next, double eps) {
  return std::log(static_cast<double>(bigram) + eps) / std::log(static_cast<double>(unigram_next) + eps);
}

inline double nonn_scaled_weight(Count bigram, Count max_successor) {
  return static_cast<double>(bigram) / static_cast<double>(max_successor);
}

namespace detail {

inline Count require_max_successor(const FreqTable& freq, TokenId a, const char* who) {
  const Count m = freq.max_successor_count(a);
  if (m == 0) throw Error(std::string(who) + ": token id " + std::to_string(a) + " has no successors");
  return m;
}

inline void require_log_eps(double eps, const char* who) {
  if (!(eps > 1.0)) throw Error(std::string(who) + ": epsilon must be > 1");
}

}  // namespace detail

// Table-level weights for the bigram (a, b).

inline double log_norm(const FreqTable& freq, TokenId a, TokenId b, double eps = kLogSmoothing) {
  detail::require_log_eps(eps, "log_norm");
  return log_norm_weight(freq.bigram(a, b), detail::require_max_successor(freq, a, "log_norm"), eps);
}

inline double mutual_norm(const FreqTable& freq, TokenId a, TokenId b, double eps = kMutualSmoothing) {
  if (!(eps > 0.0)) throw Error("mutual_norm: epsilon must be > 0");
  return mutual_norm_weight(freq.bigram(a, b), freq.unigram(b), eps);
}

inline double log_mutual_norm(const FreqTable& freq, TokenId a, TokenId b, double eps = kLogSmoothing) {
  detail::require_log_eps(eps, "log_mutual_norm");
  return log_mutual_norm_weight(freq.bigram(a, b), freq.unigram(b), eps);
}

inline double nonn_weight(const FreqTable& freq, TokenId a, TokenId b) {
  return nonn_scaled_weight(freq.bigram(a, b), detail::require_max_successor(freq, a, "nonn_weight"));
}

inline double method_weight(const FreqTable& freq, NormMethod m, TokenId a, TokenId b, double eps) {
  switch (m) {
    case NormMethod::NonN: return nonn_weight(freq, a, b);
    case NormMethod::LN: return log_norm(freq, a, b, eps);
    case NormMethod::MN: return mutual_norm(freq, a, b, eps);
    case NormMethod::LMN: return log_mutual_norm(freq, a, b, eps);
  }
  return 1.0;
}

struct WeightedNext {
  TokenId next;
  double weight;

  friend bool operator==(const WeightedNext&, const WeightedNext&) = default;
};

// Per-context top-K weights. A default-constructed table has no rows and
// default weight 1, so applying it is the identity.
class NormTable {
 public:
  using Rows = std::map<TokenId, std::vector<WeightedNext>>;

  NormTable() { config_.method = NormMethod::NonN; config_.epsilon = 0.0; }

  NormTable(NormConfig config, std::uint64_t vocab_fingerprint, Rows rows)
      : config_(config), fingerprint_(vocab_fingerprint), rows_(std::move(rows)) {
    config_.validate();
    for (const auto& [prev, entries] : rows_) {
      if (entries.size() > config_.k)
        throw Error("norm table: row " + std::to_string(prev) + " has more than k entries");
      for (const auto& e : entries)
        if (!std::isfinite(e.weight) || !(e.weight > 0.0) || e.weight > 1.0)
          throw Error("norm table: weight outside (0, 1] in row " + std::to_string(prev));
    }
  }

  const NormConfig& config() const { return config_; }
  std::uint64_t vocab_fingerprint() const { return fingerprint_; }
  const Rows& rows() const { return rows_; }

  std::span<const WeightedNext> row(TokenId prev) const {
    auto it = rows_.find(prev);
    if (it == rows_.end()) return {};
    return it->second;
  }

  double weight(TokenId prev, TokenId next) const {
    for (const auto& e : row(prev))
      if (e.next == next) return e.weight;
    return config_.default_weight;
  }

  // Dense weights over the whole vocabulary for one context.
  void fill_weights(TokenId prev, std::span<double> out) const {
    std::fill(out.begin(), out.end(), config_.default_weight);
    for (const auto& e : row(prev))
      if (e.next < out.size()) out[e.next] = e.weight;
  }

  std::vector<double> dense_weights(TokenId prev, std::size_t vocab_size) const {
    std::vector<double> w(vocab_size);
    fill_weights(prev, w);
    return w;
  }

  friend bool operator==(const NormTable&, const NormTable&) = default;

 private:
  NormConfig config_;
  std::uint64_t fingerprint_ = 0;
  Rows rows_;
};

inline NormTable build_norm_table(const FreqTable& freq, const NormConfig& config) {
  config.validate();
  if (freq.empty()) throw Error("build_norm_table: frequency table is empty");
  NormTable::Rows rows;
  for (const auto& [prev, successors] : freq.bigrams()) {
    const auto top = top_k_next(freq, prev, config.k);
    if (top.empty()) continue;
    const Count max_v = top.front().count;
    std::vector<WeightedNext> entries;
    entries.reserve(top.size());
    for (const auto& s : top) {
      double w = 1.0;
      switch (config.method) {
        case NormMethod::NonN: w = nonn_scaled_weight(s.count, max_v); break;
        case NormMethod::LN: w = log_norm_weight(s.count, max_v, config.epsilon); break;
        case NormMethod::MN: w = mutual_norm_weight(s.count, freq.unigram(s.next), config.epsilon); break;
        case NormMethod::LMN: w = log_mutual_norm_weight(s.count, freq.unigram(s.next), config.epsilon); break;
      }
      entries.push_back({s.next, w});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const WeightedNext& a, const WeightedNext& b) {
      if (a.weight != b.weight) return a.weight > b.weight;
      return a.next < b.next;
    });
    rows.emplace(prev, std::move(entries));
  }
  return NormTable(config, freq.vocab_fingerprint(), std::move(rows));
}

// p'_j = w_j p_j / sum_k w_k p_k.
inline std::vector<double> reweight(std::span<const double> p, std::span<const double> weights) {
  if (p.size() != weights.size()) throw Error("reweight: size mismatch");
  std::vector<double> out(p.size());
  double z = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] >= 0.0)) throw Error("reweight: negative or NaN probability at index " + std::to_string(j));
    out[j] = weights[j] * p[j];
    z += out[j];
  }
  if (!(z > 0.0)) throw Error("reweight: reweighted mass is zero");
  for (auto& v : out) v /= z;
  return out;
}

inline constexpr double kDistributionTolerance = 1e-9;

inline std::vector<double> apply_norm(std::span<const double> p_hat, TokenId prev, const NormTable& table) {
  double total = 0.0;
  for (double v : p_hat) total += v;
  if (std::abs(total - 1.0) > kDistributionTolerance)
    throw Error("apply_norm: input does not sum to 1 (sum = " + detail::format_double(total) + ")");
  return reweight(p_hat, table.dense_weights(prev, p_hat.size()));
}

struct DistributionStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t n = 0;
};

inline DistributionStats summarize(std::span<const double> values) {
  if (values.empty()) throw Error("summarize: no values");
  DistributionStats s;
  s.n = values.size();
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(s.n));
  return s;
}

// Weights of the top_n most frequent successors of a, in count order.
inline std::vector<double> norm_series(const FreqTable& freq, NormMethod method, TokenId a, std::size_t top_n,
                                       std::optional<double> eps = std::nullopt) {
  const double e = eps.value_or(default_epsilon(method));
  const auto top = top_k_next(freq, a, top_n);
  if (top.empty()) throw Error("norm_stats: token id " + std::to_string(a) + " has no successors");
  std::vector<double> out;
  out.reserve(top.size());
  for (const auto& s : top) out.push_back(method_weight(freq, method, a, s.next, e));
  return out;
}

inline DistributionStats norm_stats(const FreqTable& freq, NormMethod method, TokenId a, std::size_t top_n = 500,
                                    std::optional<double> eps = std::nullopt) {
  return summarize(norm_series(freq, method, a, top_n, eps));
}

// Table file:
//   #NORMTABLE v1 <method> <k> <epsilon> <default_weight> <vocab_fingerprint>
//   prev<TAB>next<TAB>weight
// Rows by ascending prev id, entries by descending weight then ascending id,
// weights as shortest round-trip decimals.
inline void save_norm_table(const NormTable& table, const Vocabulary& vocab, std::ostream& out) {
  if (table.vocab_fingerprint() != 0 && table.vocab_fingerprint() != vocab.fingerprint())
    throw VocabMismatch("save_norm_table: table was not built against this vocabulary");
  const auto& c = table.config();
  out << "#NORMTABLE v1 " << to_string(c.method) << ' ' << c.k << ' ' << detail::format_double(c.epsilon) << ' '
      << detail::format_double(c.default_weight) << ' ' << detail::hex64(table.vocab_fingerprint()) << '\n';
  for (const auto& [prev, entries] : table.rows())
    for (const auto& e : entries)
      out << vocab.token(prev) << '\t' << vocab.token(e.next) << '\t' << detail::format_double(e.weight) << '\n';
}

inline NormTable load_norm_table(std::istream& in, const Vocabulary& vocab) {
  detail::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError("norm table: missing header", 1);
  auto h = detail::split(line, ' ');
  if (h.size() != 7 || h[0] != "#NORMTABLE" || h[1] != "v1") throw ParseError("norm table: bad header", 1);
  NormConfig config;
  auto method = parse_norm_method(h[2]);
  if (!method) throw ParseError("norm table: unknown method '" + std::string(h[2]) + "'", 1);
  config.method = *method;
  config.k = detail::parse_u64(h[3], 1);
  config.epsilon = detail::parse_double(h[4], 1);
  config.default_weight = detail::parse_double(h[5], 1);
  const auto fingerprint = detail::parse_hex64(h[6], 1);
  if (fingerprint != 0 && fingerprint != vocab.fingerprint())
    throw VocabMismatch("norm table: vocabulary fingerprint does not match the supplied vocabulary");

  NormTable::Rows rows;
  while (reader.next(line)) {
    auto f = detail::split(line, '\t');
    if (f.size() != 3) throw ParseError("norm table: expected prev<TAB>next<TAB>weight", reader.line_no());
    auto prev = vocab.find(f[0]);
    auto next = vocab.find(f[1]);
    if (!prev || !next) throw ParseError("norm table: unknown token", reader.line_no());
    const double w = detail::parse_double(f[2], reader.line_no());
    if (!(w > 0.0 && w <= 1.0)) throw ParseError("norm table: weight outside (0, 1]", reader.line_no());
    rows[*prev].push_back({*next, w});
  }
  try {
    return NormTable(config, fingerprint, std::move(rows));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), 0);
  }
}

}  // namespace longtail
