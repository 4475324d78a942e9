#pragma once

// Unigram/bigram counting over BOS/EOS-framed sentences, with a deterministic
// merge for sharded counting and a line-based table format.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "longtail/corpus.hpp"
#include "longtail/detail/text.hpp"
#include "longtail/error.hpp"

namespace longtail {

struct NgramEntry {
  TokenId prev;
  TokenId next;
  Count count;

  friend bool operator==(const NgramEntry&, const NgramEntry&) = default;
};

struct Successor {
  TokenId next;
  Count count;

  friend bool operator==(const Successor&, const Successor&) = default;
};

class FreqTable {
 public:
  using Row = std::unordered_map<TokenId, Count>;

  // Unbound empty table; the identity element of merge().
  FreqTable() = default;
  explicit FreqTable(std::uint64_t vocab_fingerprint) : fingerprint_(vocab_fingerprint) {}

  // Counts BOS t1 ... tm EOS: every framed token and every adjacent pair.
  void add_sentence(std::span<const TokenId> ids) {
    TokenId prev = kBosId;
    add_unigram(kBosId, 1);
    for (auto id : ids) {
      add_unigram(id, 1);
      add_bigram(prev, id, 1);
      prev = id;
    }
    add_unigram(kEosId, 1);
    add_bigram(prev, kEosId, 1);
    ++sentences_;
  }
  void add_sentence(const TokenSequence& seq) { add_sentence(std::span<const TokenId>(seq.ids)); }

  void add_unigram(TokenId id, Count n) {
    if (n == 0) return;
    unigram_[id] += n;
    total_ += n;
  }
  void add_bigram(TokenId prev, TokenId next, Count n) {
    if (n == 0) return;
    bigram_[prev][next] += n;
  }
  void add_sentences(Count n) { sentences_ += n; }

  Count unigram(TokenId id) const {
    auto it = unigram_.find(id);
    return it == unigram_.end() ? 0 : it->second;
  }

  Count bigram(TokenId prev, TokenId next) const {
    auto row = bigram_.find(prev);
    if (row == bigram_.end()) return 0;
    auto it = row->second.find(next);
    return it == row->second.end() ? 0 : it->second;
  }

  // Successors of prev, nullptr when it has none.
  const Row* successors(TokenId prev) const {
    auto row = bigram_.find(prev);
    return row == bigram_.end() ? nullptr : &row->second;
  }

  // Largest successor count of prev, 0 when it has none.
  Count max_successor_count(TokenId prev) const {
    const Row* row = successors(prev);
    if (!row) return 0;
    Count m = 0;
    for (const auto& [next, n] : *row) m = std::max(m, n);
    return m;
  }

  const std::unordered_map<TokenId, Count>& unigrams() const { return unigram_; }
  const std::unordered_map<TokenId, Row>& bigrams() const { return bigram_; }

  Count total_tokens() const { return total_; }
  Count sentence_count() const { return sentences_; }
  std::uint64_t vocab_fingerprint() const { return fingerprint_; }
  bool empty() const { return total_ == 0 && sentences_ == 0 && bigram_.empty(); }

  // Pointwise sum. Both tables must come from the same vocabulary unless one
  // of them is unbound.
  void merge_from(const FreqTable& other) {
    if (fingerprint_ != 0 && other.fingerprint_ != 0 && fingerprint_ != other.fingerprint_)
      throw VocabMismatch("merge: tables were counted against different vocabularies (" +
                          detail::hex64(fingerprint_) + " vs " + detail::hex64(other.fingerprint_) + ")");
    if (fingerprint_ == 0) fingerprint_ = other.fingerprint_;
    for (const auto& [id, n] : other.unigram_) unigram_[id] += n;
    for (const auto& [prev, row] : other.bigram_) {
      auto& mine = bigram_[prev];
      for (const auto& [next, n] : row) mine[next] += n;
    }
    total_ += other.total_;
    sentences_ += other.sentences_;
  }

  // Bigrams ordered by descending count, then ascending (prev, next).
  std::vector<NgramEntry> sorted_bigrams() const {
    std::vector<NgramEntry> out;
    for (const auto& [prev, row] : bigram_)
      for (const auto& [next, n] : row) out.push_back({prev, next, n});
    std::sort(out.begin(), out.end(), [](const NgramEntry& a, const NgramEntry& b) {
      if (a.count != b.count) return a.count > b.count;
      if (a.prev != b.prev) return a.prev < b.prev;
      return a.next < b.next;
    });
    return out;
  }

  friend bool operator==(const FreqTable& a, const FreqTable& b) {
    return a.fingerprint_ == b.fingerprint_ && a.total_ == b.total_ && a.sentences_ == b.sentences_ &&
           a.unigram_ == b.unigram_ && a.bigram_ == b.bigram_;
  }

 private:
  std::uint64_t fingerprint_ = 0;
  Count total_ = 0;
  Count sentences_ = 0;
  std::unordered_map<TokenId, Count> unigram_;
  std::unordered_map<TokenId, Row> bigram_;
};

template <typename SequenceRange>
FreqTable count_ngrams(const SequenceRange& sentences, const Vocabulary& vocab) {
  FreqTable table(vocab.fingerprint());
  for (const auto& s : sentences) table.add_sentence(s);
  return table;
}

inline FreqTable merge(const FreqTable& a, const FreqTable& b) {
  FreqTable out = a;
  out.merge_from(b);
  return out;
}

// Counts contiguous shards on worker threads and merges them in shard order.
// The result is identical to count_ngrams over the whole span.
inline FreqTable count_ngrams_parallel(std::span<const TokenSequence> sentences, const Vocabulary& vocab,
                                       unsigned workers) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(sentences.size())));
  if (workers <= 1) return count_ngrams(sentences, vocab);
  std::vector<FreqTable> shards(workers, FreqTable(vocab.fingerprint()));
  {
    std::vector<std::jthread> threads;
    const std::size_t per = (sentences.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = std::min(sentences.size(), w * per);
      const std::size_t hi = std::min(sentences.size(), lo + per);
      threads.emplace_back([&, lo, hi, w] { shards[w] = count_ngrams(sentences.subspan(lo, hi - lo), vocab); });
    }
  }
  FreqTable out(vocab.fingerprint());
  for (const auto& s : shards) out.merge_from(s);
  return out;
}

inline constexpr std::size_t kDefaultTopK = 200;

// Successors of prev by descending count, ties by ascending id, at most k.
inline std::vector<Successor> top_k_next(const FreqTable& table, TokenId prev, std::size_t k) {
  if (k < 1) throw Error("top_k_next: k must be >= 1");
  std::vector<Successor> out;
  const auto* row = table.successors(prev);
  if (!row) return out;
  out.reserve(row->size());
  for (const auto& [next, n] : *row) out.push_back({next, n});
  auto by_count = [](const Successor& a, const Successor& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.next < b.next;
  };
  if (out.size() > k) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), by_count);
    out.resize(k);
  } else {
    std::sort(out.begin(), out.end(), by_count);
  }
  return out;
}

// Table file:
//   #FREQTABLE v1 <total_tokens> <sentence_count> <vocab_fingerprint>
//   #UNIGRAM
//   token<TAB>count          (descending count, ascending token id)
//   #BIGRAM
//   prev<TAB>next<TAB>count  (descending count, ascending prev then next id)
// Tokens are written as surface forms of the vocabulary the table was counted with.
inline void save_table(const FreqTable& table, const Vocabulary& vocab, std::ostream& out) {
  if (table.vocab_fingerprint() != 0 && table.vocab_fingerprint() != vocab.fingerprint())
    throw VocabMismatch("save_table: table was not counted against this vocabulary");
  out << "#FREQTABLE v1 " << table.total_tokens() << ' ' << table.sentence_count() << ' '
      << detail::hex64(table.vocab_fingerprint()) << '\n';

  std::vector<Successor> uni;
  uni.reserve(table.unigrams().size());
  for (const auto& [id, n] : table.unigrams()) uni.push_back({id, n});
  std::sort(uni.begin(), uni.end(), [](const Successor& a, const Successor& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.next < b.next;
  });
  out << "#UNIGRAM\n";
  for (const auto& u : uni) out << vocab.token(u.next) << '\t' << u.count << '\n';

  out << "#BIGRAM\n";
  for (const auto& e : table.sorted_bigrams())
    out << vocab.token(e.prev) << '\t' << vocab.token(e.next) << '\t' << e.count << '\n';
}

inline FreqTable load_table(std::istream& in, const Vocabulary& vocab) {
  detail::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError("freq table: missing header", 1);
  auto header = detail::split(line, ' ');
  if (header.size() != 5 || header[0] != "#FREQTABLE" || header[1] != "v1")
    throw ParseError("freq table: bad header", reader.line_no());
  const Count total = detail::parse_u64(header[2], reader.line_no());
  const Count sentences = detail::parse_u64(header[3], reader.line_no());
  const auto fingerprint = detail::parse_hex64(header[4], reader.line_no());
  if (fingerprint != 0 && fingerprint != vocab.fingerprint())
    throw VocabMismatch("freq table: vocabulary fingerprint " + detail::hex64(fingerprint) +
                        " does not match the supplied vocabulary " + detail::hex64(vocab.fingerprint()));

  auto id_of = [&](std::string_view tok) {
    auto id = vocab.find(tok);
    if (!id) throw ParseError("freq table: unknown token '" + std::string(tok) + "'", reader.line_no());
    return *id;
  };

  FreqTable table(fingerprint);
  table.add_sentences(sentences);
  if (!reader.next(line) || line != "#UNIGRAM") throw ParseError("freq table: expected #UNIGRAM", reader.line_no());
  bool saw_bigram = false;
  while (reader.next(line)) {
    if (line == "#BIGRAM") {
      saw_bigram = true;
      break;
    }
    auto f = detail::split(line, '\t');
    if (f.size() != 2) throw ParseError("freq table: expected token<TAB>count", reader.line_no());
    const auto id = id_of(f[0]);
    if (table.unigram(id) != 0) throw ParseError("freq table: duplicate unigram", reader.line_no());
    const auto n = detail::parse_u64(f[1], reader.line_no());
    if (n == 0) throw ParseError("freq table: zero count", reader.line_no());
    table.add_unigram(id, n);
  }
  if (!saw_bigram) throw ParseError("freq table: truncated, missing #BIGRAM section", reader.line_no() + 1);
  while (reader.next(line)) {
    auto f = detail::split(line, '\t');
    if (f.size() != 3) throw ParseError("freq table: expected prev<TAB>next<TAB>count", reader.line_no());
    const auto prev = id_of(f[0]);
    const auto next = id_of(f[1]);
    if (table.bigram(prev, next) != 0) throw ParseError("freq table: duplicate bigram", reader.line_no());
    const auto n = detail::parse_u64(f[2], reader.line_no());
    if (n == 0) throw ParseError("freq table: zero count", reader.line_no());
    table.add_bigram(prev, next, n);
  }
  if (table.total_tokens() != total)
    throw ParseError("freq table: unigram counts sum to " + std::to_string(table.total_tokens()) +
                         " but header declares " + std::to_string(total),
                     reader.line_no());
  // A clean cut inside the bigram section leaves some row short of its unigram count.
  for (const auto& [id, n] : table.unigrams()) {
    if (id == kEosId) continue;
    Count row_sum = 0;
    if (const auto* row = table.successors(id))
      for (const auto& [next, c] : *row) row_sum += c;
    if (row_sum != n)
      throw ParseError("freq table: successors of '" + vocab.token(id) + "' sum to " + std::to_string(row_sum) +
                           ", expected " + std::to_string(n) + " (truncated?)",
                       reader.line_no() + 1);
  }
  return table;
}

}  // namespace longtail
