#pragma once

// Diversity, informativeness, entropy and BLEU over generated text.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "longtail/corpus.hpp"
#include "longtail/detail/text.hpp"
#include "longtail/error.hpp"

namespace longtail {

// Sentences of surface tokens; repeats allowed.
using GeneratedCorpus = std::vector<std::vector<std::string>>;

inline GeneratedCorpus split_corpus(std::span<const std::string> lines) {
  GeneratedCorpus out;
  out.reserve(lines.size());
  for (const auto& l : lines) {
    auto toks = detail::split_ws(l);
    out.emplace_back(toks.begin(), toks.end());
  }
  return out;
}

namespace detail {

inline std::string join(std::span<const std::string> toks, std::size_t from, std::size_t n, char sep) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key += sep;
    key += toks[from + i];
  }
  return key;
}

// Frequency of every n-gram inside sentence boundaries.
inline std::unordered_map<std::string, Count> ngram_counts(const GeneratedCorpus& corpus, std::size_t n) {
  std::unordered_map<std::string, Count> counts;
  for (const auto& s : corpus)
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[join(s, i, n, '\t')];
  return counts;
}

}  // namespace detail

inline std::size_t distinct_ngrams(const GeneratedCorpus& corpus, std::size_t n, Count min_freq = 1) {
  if (n != 1 && n != 2) throw Error("distinct_ngrams: n must be 1 or 2");
  std::size_t distinct = 0;
  for (const auto& [key, c] : detail::ngram_counts(corpus, n))
    if (c >= min_freq) ++distinct;
  return distinct;
}

struct SentenceCount {
  std::string sentence;
  Count count;

  friend bool operator==(const SentenceCount&, const SentenceCount&) = default;
};

struct SentenceDiversity {
  std::size_t distinct = 0;
  std::vector<SentenceCount> top;  // descending count, ties lexicographic
};

inline SentenceDiversity sentence_diversity(const GeneratedCorpus& corpus, std::size_t top = 5) {
  if (top < 1) throw Error("sentence_diversity: top must be >= 1");
  std::unordered_map<std::string, Count> counts;
  for (const auto& s : corpus) ++counts[detail::join(s, 0, s.size(), ' ')];
  std::vector<SentenceCount> all;
  all.reserve(counts.size());
  for (auto& [s, c] : counts) all.push_back({s, c});
  std::sort(all.begin(), all.end(), [](const SentenceCount& a, const SentenceCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.sentence < b.sentence;
  });
  SentenceDiversity out;
  out.distinct = all.size();
  all.resize(std::min(all.size(), top));
  out.top = std::move(all);
  return out;
}

enum class PosTag { NN, VB, OTHER };

inline std::optional<PosTag> parse_pos_tag(std::string_view s) {
  if (s.starts_with("NN")) return PosTag::NN;
  if (s.starts_with("VB")) return PosTag::VB;
  if (s == "OTHER") return PosTag::OTHER;
  return std::nullopt;
}

// Coarse tagger: exact lexicon entry, then the first matching suffix rule,
// then OTHER.
class PosLexicon {
 public:
  void add(std::string token, PosTag tag) { words_[std::move(token)] = tag; }
  void add_suffix_rule(std::string suffix, PosTag tag) { suffixes_.emplace_back(std::move(suffix), tag); }

  PosTag tag(std::string_view token) const {
    if (auto it = words_.find(std::string(token)); it != words_.end()) return it->second;
    for (const auto& [suffix, t] : suffixes_)
      if (token.size() > suffix.size() && token.ends_with(suffix)) return t;
    return PosTag::OTHER;
  }

 private:
  std::unordered_map<std::string, PosTag> words_;
  std::vector<std::pair<std::string, PosTag>> suffixes_;
};

// `token<TAB>TAG` lines, then an optional `#SUFFIX` section of
// `suffix<TAB>TAG` lines in priority order. TAG is NN*, VB* or OTHER.
inline PosLexicon load_pos_lexicon(std::istream& in) {
  PosLexicon lex;
  detail::LineReader reader(in);
  std::string line;
  bool suffix_section = false;
  while (reader.next(line)) {
    if (line.empty()) continue;
    if (line == "#SUFFIX") {
      suffix_section = true;
      continue;
    }
    auto f = detail::split(line, '\t');
    if (f.size() != 2 || f[0].empty()) throw ParseError("pos lexicon: expected entry<TAB>TAG", reader.line_no());
    auto tag = parse_pos_tag(f[1]);
    if (!tag) throw ParseError("pos lexicon: unknown tag '" + std::string(f[1]) + "'", reader.line_no());
    if (suffix_section)
      lex.add_suffix_rule(std::string(f[0]), *tag);
    else
      lex.add(std::string(f[0]), *tag);
  }
  return lex;
}

struct Informativeness {
  Count nn_count = 0;
  Count vb_count = 0;
  Count entity_count = 0;  // nouns + verbs
  double avg_len = 0.0;
};

inline Informativeness informativeness(const GeneratedCorpus& corpus, const PosLexicon& lex) {
  Informativeness out;
  Count tokens = 0;
  for (const auto& s : corpus) {
    tokens += s.size();
    for (const auto& t : s) {
      switch (lex.tag(t)) {
        case PosTag::NN: ++out.nn_count; break;
        case PosTag::VB: ++out.vb_count; break;
        case PosTag::OTHER: break;
      }
    }
  }
  out.entity_count = out.nn_count + out.vb_count;
  out.avg_len = corpus.empty() ? 0.0 : static_cast<double>(tokens) / static_cast<double>(corpus.size());
  return out;
}

inline double average_length(const GeneratedCorpus& corpus) {
  if (corpus.empty()) return 0.0;
  Count tokens = 0;
  for (const auto& s : corpus) tokens += s.size();
  return static_cast<double>(tokens) / static_cast<double>(corpus.size());
}

// Shannon entropy of the unigram distribution, in bits.
inline double word_entropy(const GeneratedCorpus& corpus) {
  const auto counts = detail::ngram_counts(corpus, 1);
  Count total = 0;
  for (const auto& [w, c] : counts) total += c;
  if (total == 0) throw Error("word_entropy: corpus has no tokens");
  double h = 0.0;
  for (const auto& [w, c] : counts) {
    const double q = static_cast<double>(c) / static_cast<double>(total);
    h -= q * std::log2(q);
  }
  return h;
}

inline constexpr std::size_t kBleuMaxOrder = 4;

// Corpus BLEU-4 with uniform weights, clipped n-gram counts pooled over the
// corpus and the brevity penalty exp(1 - r/c) when c <= r. An order with
// candidates but no matches uses 1 / (2 * candidates) as its precision. No
// unigram match at all scores 0. Orders longer than every hypothesis are left
// out and the weights spread over the remaining orders.
inline double corpus_bleu(const GeneratedCorpus& hypotheses, const GeneratedCorpus& references) {
  if (hypotheses.size() != references.size())
    throw Error("corpus_bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                std::to_string(references.size()) + " references");
  std::array<Count, kBleuMaxOrder> matches{}, totals{};
  Count hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& h = hypotheses[i];
    const auto& r = references[i];
    if (r.empty()) throw Error("corpus_bleu: empty reference on line " + std::to_string(i + 1));
    hyp_len += h.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= kBleuMaxOrder; ++n) {
      if (h.size() < n) continue;
      std::unordered_map<std::string, Count> ref_counts;
      for (std::size_t j = 0; j + n <= r.size(); ++j) ++ref_counts[detail::join(r, j, n, '\t')];
      std::unordered_map<std::string, Count> hyp_counts;
      for (std::size_t j = 0; j + n <= h.size(); ++j) ++hyp_counts[detail::join(h, j, n, '\t')];
      for (const auto& [g, c] : hyp_counts) {
        auto it = ref_counts.find(g);
        matches[n - 1] += it == ref_counts.end() ? 0 : std::min(c, it->second);
        totals[n - 1] += c;
      }
    }
  }
  if (hyp_len == 0 || matches[0] == 0) return 0.0;

  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < kBleuMaxOrder; ++n) {
    if (totals[n] == 0) break;
    const double p = matches[n] > 0 ? static_cast<double>(matches[n]) / static_cast<double>(totals[n])
                                    : 1.0 / (2.0 * static_cast<double>(totals[n]));
    log_sum += std::log(p);
    ++orders;
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return std::min(1.0, bp * std::exp(log_sum / static_cast<double>(orders)));
}

struct BigramReport {
  std::vector<std::pair<std::string, std::size_t>> rows;
  std::size_t sum = 0;
};

inline constexpr Count kDefaultBigramReportMinFreq = 10;

// For each start word, how many distinct bigrams beginning with it occur more
// than min_freq times.
inline BigramReport bigram_report(const GeneratedCorpus& corpus, std::span<const std::string> start_words,
                                  Count min_freq = kDefaultBigramReportMinFreq) {
  if (min_freq < 1) throw Error("bigram_report: min_freq must be >= 1");
  std::unordered_map<std::string, std::map<std::string, Count>> by_first;
  for (const auto& s : corpus)
    for (std::size_t i = 0; i + 1 < s.size(); ++i) ++by_first[s[i]][s[i + 1]];
  BigramReport out;
  for (const auto& w : start_words) {
    std::size_t n = 0;
    if (auto it = by_first.find(w); it != by_first.end())
      for (const auto& [next, c] : it->second)
        if (c > min_freq) ++n;
    out.rows.emplace_back(w, n);
    out.sum += n;
  }
  return out;
}

struct MetricsReport {
  std::size_t sentences = 0;
  std::size_t distinct_unigrams = 0;
  std::size_t distinct_bigrams = 0;
  std::size_t distinct_sentences = 0;
  std::vector<SentenceCount> top5_sentences;
  Count top5_total = 0;
  std::optional<Informativeness> informativeness;  // only with a lexicon
  double avg_len = 0.0;
  std::optional<double> word_entropy_bits;  // absent for a corpus without tokens
  std::optional<double> bleu;               // only with references
  std::optional<BigramReport> bigrams;      // only with start words
};

struct EvalOptions {
  Count min_freq = 1;
  const GeneratedCorpus* references = nullptr;
  const PosLexicon* lexicon = nullptr;
  std::vector<std::string> bigram_start_words;
  Count bigram_min_freq = kDefaultBigramReportMinFreq;
};

inline MetricsReport evaluate(const GeneratedCorpus& corpus, const EvalOptions& opt = {}) {
  MetricsReport r;
  r.sentences = corpus.size();
  r.distinct_unigrams = distinct_ngrams(corpus, 1, opt.min_freq);
  r.distinct_bigrams = distinct_ngrams(corpus, 2, opt.min_freq);
  auto sd = sentence_diversity(corpus, 5);
  r.distinct_sentences = sd.distinct;
  r.top5_sentences = std::move(sd.top);
  for (const auto& s : r.top5_sentences) r.top5_total += s.count;
  r.avg_len = average_length(corpus);
  if (opt.lexicon) r.informativeness = informativeness(corpus, *opt.lexicon);
  if (r.avg_len > 0.0) r.word_entropy_bits = word_entropy(corpus);
  if (opt.references) r.bleu = corpus_bleu(corpus, *opt.references);
  if (!opt.bigram_start_words.empty())
    r.bigrams = bigram_report(corpus, opt.bigram_start_words, opt.bigram_min_freq);
  return r;
}

// One `name<TAB>value` line per metric.
inline void write_report_tsv(const MetricsReport& r, std::ostream& out) {
  auto num = [](double v) { return detail::format_double(v); };
  out << "sentences\t" << r.sentences << '\n';
  out << "distinct_unigrams\t" << r.distinct_unigrams << '\n';
  out << "distinct_bigrams\t" << r.distinct_bigrams << '\n';
  out << "distinct_sentences\t" << r.distinct_sentences << '\n';
  for (std::size_t i = 0; i < r.top5_sentences.size(); ++i) {
    out << "top5_" << i + 1 << "_sentence\t" << r.top5_sentences[i].sentence << '\n';
    out << "top5_" << i + 1 << "_count\t" << r.top5_sentences[i].count << '\n';
  }
  out << "top5_total\t" << r.top5_total << '\n';
  if (r.informativeness) {
    out << "nn_count\t" << r.informativeness->nn_count << '\n';
    out << "vb_count\t" << r.informativeness->vb_count << '\n';
    out << "entity_count\t" << r.informativeness->entity_count << '\n';
  }
  out << "avg_len\t" << num(r.avg_len) << '\n';
  if (r.word_entropy_bits) out << "word_entropy_bits\t" << num(*r.word_entropy_bits) << '\n';
  if (r.bleu) out << "bleu\t" << num(*r.bleu) << '\n';
  if (r.bigrams) {
    for (const auto& [w, n] : r.bigrams->rows) out << "bigrams_from_" << w << '\t' << n << '\n';
    out << "bigrams_from_sum\t" << r.bigrams->sum << '\n';
  }
}

inline void write_report_pretty(const MetricsReport& r, std::ostream& out) {
  std::ostringstream tsv;
  write_report_tsv(r, tsv);
  std::istringstream in(tsv.str());
  std::string line;
  std::vector<std::pair<std::string, std::string>> rows;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    auto tab = line.find('\t');
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    width = std::max(width, tab);
  }
  for (auto& [k, v] : rows) {
    std::replace(v.begin(), v.end(), '\t', ' ');
    out << std::left << std::setw(static_cast<int>(width + 2)) << k << v << '\n';
  }
}

}  // namespace longtail
