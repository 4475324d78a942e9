#pragma once

// Tokenization, vocabulary construction and encoding of raw sentences.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "longtail/detail/text.hpp"
#include "longtail/error.hpp"

namespace longtail {

using TokenId = std::uint32_t;
using Count = std::uint64_t;

inline constexpr TokenId kUnkId = 0;
inline constexpr TokenId kNumberId = 1;
inline constexpr TokenId kBosId = 2;
inline constexpr TokenId kEosId = 3;
inline constexpr std::size_t kNumSpecials = 4;

inline constexpr std::string_view kUnkToken = "<UNK>";
inline constexpr std::string_view kNumberToken = "<NUMBER>";
inline constexpr std::string_view kBosToken = "<BOS>";
inline constexpr std::string_view kEosToken = "<EOS>";

inline constexpr std::array<std::string_view, kNumSpecials> kSpecialTokens{kUnkToken, kNumberToken, kBosToken,
                                                                           kEosToken};

inline bool is_special_token(std::string_view tok) {
  return std::find(kSpecialTokens.begin(), kSpecialTokens.end(), tok) != kSpecialTokens.end();
}

struct TokenizerConfig {
  bool lowercase = false;
  bool mask_numbers = true;
  bool split_punctuation = true;

  // Pure whitespace splitting.
  static TokenizerConfig whitespace() { return {false, false, false}; }

  friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

// One sentence as vocabulary ids, without BOS/EOS framing.
struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10ffff ||
        (cp >= 0xd800 && cp <= 0xdfff))
      return false;
    i += len;
  }
  return true;
}

namespace detail {

inline bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && ((u >= 0x21 && u <= 0x2f) || (u >= 0x3a && u <= 0x40) || (u >= 0x5b && u <= 0x60) ||
                      (u >= 0x7b && u <= 0x7e));
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Digits, optionally grouped or separated by '.', ',' or ':' ("42", "1,000", "3.14", "3:16").
inline bool is_number_like(std::string_view s) {
  if (s.empty() || !is_digit(s.front()) || !is_digit(s.back())) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return is_digit(c) || c == '.' || c == ',' || c == ':'; });
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace detail

// Whitespace split, then optional punctuation separation, lowercasing and
// number masking. Tokens spelled exactly like a special token are kept intact.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config) {
  std::vector<std::string> out;
  auto emit_core = [&](std::string_view core) {
    if (core.empty()) return;
    std::string tok = config.lowercase ? detail::ascii_lower(core) : std::string(core);
    if (config.mask_numbers && detail::is_number_like(tok)) tok = kNumberToken;
    out.push_back(std::move(tok));
  };

  for (auto piece : detail::split_ws(text)) {
    if (is_special_token(piece)) {
      out.emplace_back(piece);
      continue;
    }
    if (!config.split_punctuation) {
      emit_core(piece);
      continue;
    }
    std::size_t b = 0, e = piece.size();
    while (b < e && detail::is_ascii_punct(piece[b])) ++b;
    while (e > b && detail::is_ascii_punct(piece[e - 1])) --e;
    for (std::size_t i = 0; i < b; ++i) out.emplace_back(1, piece[i]);
    emit_core(piece.substr(b, e - b));
    for (std::size_t i = e; i < piece.size(); ++i) out.emplace_back(1, piece[i]);
  }
  return out;
}

// Token frequencies accumulated over a stream; merging is order independent.
class TokenCounter {
 public:
  void add(std::string_view token, Count n = 1) {
    auto it = counts_.find(std::string(token));
    if (it == counts_.end())
      counts_.emplace(std::string(token), n);
    else
      it->second += n;
  }

  template <typename Range>
  void add_all(const Range& tokens) {
    for (const auto& t : tokens) add(t);
  }

  void merge(const TokenCounter& other) {
    for (const auto& [tok, n] : other.counts_) add(tok, n);
  }

  const std::unordered_map<std::string, Count>& counts() const { return counts_; }

 private:
  std::unordered_map<std::string, Count> counts_;
};

class Vocabulary {
 public:
  // Special tokens only.
  Vocabulary() : Vocabulary(std::vector<std::pair<std::string, Count>>{}) {}

  // Entries are (token, count) in id order, without the special tokens; the
  // special counts are given separately.
  explicit Vocabulary(std::vector<std::pair<std::string, Count>> entries,
                      std::array<Count, kNumSpecials> special_counts = {}) {
    id_to_token_.reserve(entries.size() + kNumSpecials);
    counts_.reserve(entries.size() + kNumSpecials);
    for (std::size_t i = 0; i < kNumSpecials; ++i) insert(std::string(kSpecialTokens[i]), special_counts[i]);
    for (auto& [tok, n] : entries) {
      if (tok.empty() || is_special_token(tok)) throw Error("vocabulary: invalid token '" + tok + "'");
      if (token_to_id_.count(tok)) throw Error("vocabulary: duplicate token '" + tok + "'");
      insert(std::move(tok), n);
    }
    detail::Fnv1a h;
    for (const auto& t : id_to_token_) {
      h.update(t);
      h.update("\n");
    }
    fingerprint_ = h.value();
  }

  std::size_t size() const { return id_to_token_.size(); }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
  }

  // Id for token, UNK when absent.
  TokenId lookup(std::string_view token) const { return find(token).value_or(kUnkId); }

  bool contains(TokenId id) const { return id < id_to_token_.size(); }

  const std::string& token(TokenId id) const {
    if (!contains(id)) throw Error("vocabulary: token id " + std::to_string(id) + " out of range");
    return id_to_token_[id];
  }

  Count count(TokenId id) const {
    if (!contains(id)) throw Error("vocabulary: token id " + std::to_string(id) + " out of range");
    return counts_[id];
  }

  std::span<const std::string> tokens() const { return id_to_token_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_ && a.counts_ == b.counts_;
  }

 private:
  void insert(std::string tok, Count n) {
    token_to_id_.emplace(tok, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(std::move(tok));
    counts_.push_back(n);
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<Count> counts_;
  std::uint64_t fingerprint_ = 0;
};

inline constexpr Count kDefaultMinFreq = 10;
inline constexpr std::size_t kDefaultMaxVocab = 20000;

// Specials plus the most frequent tokens with count >= min_freq, truncated to
// max_size entries in total (descending count, then lexicographic). The UNK
// count records every occurrence that will be encoded as UNK.
inline Vocabulary build_vocab(const TokenCounter& counter, Count min_freq = kDefaultMinFreq,
                              std::size_t max_size = kDefaultMaxVocab) {
  if (min_freq < 1) throw Error("build_vocab: min_freq must be >= 1");
  if (max_size < kNumSpecials) throw Error("build_vocab: max_size must cover the special tokens");

  std::array<Count, kNumSpecials> special_counts{};
  std::vector<std::pair<std::string, Count>> candidates;
  for (const auto& [tok, n] : counter.counts()) {
    if (is_special_token(tok)) {
      for (std::size_t i = 0; i < kNumSpecials; ++i)
        if (tok == kSpecialTokens[i]) special_counts[i] += n;
    } else {
      candidates.emplace_back(tok, n);
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::pair<std::string, Count>> kept;
  const std::size_t room = max_size - kNumSpecials;
  for (auto& c : candidates) {
    if (c.second >= min_freq && kept.size() < room)
      kept.push_back(std::move(c));
    else
      special_counts[kUnkId] += c.second;
  }
  return Vocabulary(std::move(kept), special_counts);
}

template <typename TokenRange>
Vocabulary build_vocab(const TokenRange& tokens, Count min_freq = kDefaultMinFreq,
                       std::size_t max_size = kDefaultMaxVocab) {
  TokenCounter counter;
  counter.add_all(tokens);
  return build_vocab(counter, min_freq, max_size);
}

template <typename TokenRange>
TokenSequence encode(const TokenRange& tokens, const Vocabulary& vocab) {
  TokenSequence seq;
  for (const auto& t : tokens) seq.ids.push_back(vocab.lookup(t));
  return seq;
}

inline std::vector<std::string> decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (auto id : seq.ids) {
    if (!vocab.contains(id)) throw Error("decode: corrupt sequence, token id " + std::to_string(id) + " out of range");
    out.push_back(vocab.token(id));
  }
  return out;
}

// Vocabulary file: header `#VOCAB v1 <size> <fingerprint>`, then one
// `token<TAB>count` line per id, specials first.
inline void save_vocab(const Vocabulary& vocab, std::ostream& out) {
  out << "#VOCAB v1 " << vocab.size() << ' ' << detail::hex64(vocab.fingerprint()) << '\n';
  for (TokenId id = 0; id < vocab.size(); ++id) out << vocab.token(id) << '\t' << vocab.count(id) << '\n';
}

inline Vocabulary load_vocab(std::istream& in) {
  detail::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError("vocabulary: missing header", 1);
  auto header = detail::split(line, ' ');
  if (header.size() != 4 || header[0] != "#VOCAB" || header[1] != "v1")
    throw ParseError("vocabulary: bad header", reader.line_no());
  const auto size = detail::parse_u64(header[2], reader.line_no());
  const auto fingerprint = detail::parse_hex64(header[3], reader.line_no());
  if (size < kNumSpecials) throw ParseError("vocabulary: size below special token count", reader.line_no());

  std::array<Count, kNumSpecials> special_counts{};
  std::vector<std::pair<std::string, Count>> entries;
  for (std::size_t id = 0; id < size; ++id) {
    if (!reader.next(line)) throw ParseError("vocabulary: truncated, expected " + std::to_string(size) + " entries",
                                             reader.line_no() + 1);
    auto f = detail::split(line, '\t');
    if (f.size() != 2 || f[0].empty()) throw ParseError("vocabulary: expected token<TAB>count", reader.line_no());
    const auto n = detail::parse_u64(f[1], reader.line_no());
    if (id < kNumSpecials) {
      if (f[0] != kSpecialTokens[id]) throw ParseError("vocabulary: special tokens out of place", reader.line_no());
      special_counts[id] = n;
    } else {
      entries.emplace_back(std::string(f[0]), n);
    }
  }
  if (reader.next(line) && !line.empty()) throw ParseError("vocabulary: trailing content", reader.line_no());
  Vocabulary vocab;
  try {
    vocab = Vocabulary(std::move(entries), special_counts);
  } catch (const Error& e) {
    throw ParseError(e.what(), 0);
  }
  if (vocab.fingerprint() != fingerprint) throw ParseError("vocabulary: fingerprint mismatch", 1);
  return vocab;
}

// Reads a one-sentence-per-line UTF-8 file.
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  detail::LineReader reader(in);
  std::string line;
  while (reader.next(line)) {
    if (!is_valid_utf8(line)) throw ParseError(path + ": invalid UTF-8", reader.line_no());
    lines.push_back(line);
  }
  return lines;
}

}  // namespace longtail
