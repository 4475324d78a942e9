#pragma once

// A one-layer neural bigram language model (embedding -> linear -> softmax)
// trained with Adam on either plain or normalized cross-entropy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "longtail/corpus.hpp"
#include "longtail/detail/random.hpp"
#include "longtail/detail/text.hpp"
#include "longtail/error.hpp"
#include "longtail/norm_loss.hpp"
#include "longtail/normalization.hpp"

namespace longtail {

struct TinyLmParams {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  std::vector<double> embedding;       // vocab_size x dim, row-major
  std::vector<double> output_weights;  // dim x vocab_size, row-major
  std::vector<double> output_bias;     // vocab_size

  std::span<const double> embedding_row(TokenId id) const {
    return std::span<const double>(embedding).subspan(std::size_t{id} * dim, dim);
  }

  friend bool operator==(const TinyLmParams&, const TinyLmParams&) = default;
};

inline constexpr double kInitScale = 0.1;

// Entries uniform in [-0.1, 0.1], drawn in a fixed order from the seed.
inline TinyLmParams init_model(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw Error("init_model: dim must be >= 1");
  if (vocab_size < 1) throw Error("init_model: vocab_size must be >= 1");
  TinyLmParams p;
  p.vocab_size = vocab_size;
  p.dim = dim;
  detail::Rng rng(seed, /*stream=*/1);
  auto fill = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = rng.uniform(-kInitScale, kInitScale);
  };
  fill(p.embedding, vocab_size * dim);
  fill(p.output_weights, dim * vocab_size);
  fill(p.output_bias, vocab_size);
  return p;
}

inline void compute_logits(const TinyLmParams& p, TokenId prev, std::span<double> out) {
  if (prev >= p.vocab_size) throw Error("forward: token id " + std::to_string(prev) + " out of range");
  const auto h = p.embedding_row(prev);
  std::copy(p.output_bias.begin(), p.output_bias.end(), out.begin());
  for (std::size_t k = 0; k < p.dim; ++k) {
    const double hk = h[k];
    const double* w = p.output_weights.data() + k * p.vocab_size;
    for (std::size_t j = 0; j < p.vocab_size; ++j) out[j] += hk * w[j];
  }
}

inline ProbRow forward(const TinyLmParams& p, TokenId prev) {
  std::vector<double> z(p.vocab_size);
  compute_logits(p, prev, z);
  return softmax(z);
}

enum class LossMode { Standard, Normalized };

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  LossMode loss_mode = LossMode::Standard;
  std::shared_ptr<const NormTable> norm_table;  // required in Normalized mode

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be > 0");
    if (epochs < 1) throw Error("train: epochs must be >= 1");
    if (batch_size < 1) throw Error("train: batch_size must be >= 1");
    if (loss_mode == LossMode::Normalized && !norm_table) throw Error("train: normalized loss needs a norm table");
  }
};

struct TrainingExample {
  TokenId prev;
  TokenId target;
};

// Every (context, next) pair of the BOS/EOS-framed sentences.
inline std::vector<TrainingExample> training_examples(std::span<const TokenSequence> corpus) {
  std::vector<TrainingExample> out;
  for (const auto& s : corpus) {
    const auto t = TargetSequence::from_sentence(s);
    for (std::size_t i = 0; i < t.size(); ++i) out.push_back({t.prevs[i], t.targets[i]});
  }
  return out;
}

struct Gradients {
  std::vector<double> embedding;
  std::vector<double> output_weights;
  std::vector<double> output_bias;
};

// Mean loss over the batch and its gradient. With a table, the loss is the
// normalized cross-entropy; without one, the plain cross-entropy.
inline double loss_and_gradient(const TinyLmParams& p, std::span<const TrainingExample> batch, const NormTable* table,
                                Gradients& g) {
  const std::size_t n = p.vocab_size, d = p.dim;
  g.embedding.assign(n * d, 0.0);
  g.output_weights.assign(d * n, 0.0);
  g.output_bias.assign(n, 0.0);
  std::vector<double> z(n), w(n, 1.0), q(n);
  double loss = 0.0;
  for (const auto& ex : batch) {
    if (ex.target >= n) throw Error("train: target id out of range");
    compute_logits(p, ex.prev, z);
    if (table) table->fill_weights(ex.prev, w);
    weighted_softmax(z, w, q);
    loss -= std::log(q[ex.target]);
    q[ex.target] -= 1.0;  // dL/dz

    const auto h = p.embedding_row(ex.prev);
    double* ge = g.embedding.data() + std::size_t{ex.prev} * d;
    for (std::size_t k = 0; k < d; ++k) {
      const double* wk = p.output_weights.data() + k * n;
      double* gw = g.output_weights.data() + k * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        gw[j] += h[k] * q[j];
        acc += wk[j] * q[j];
      }
      ge[k] += acc;
    }
    for (std::size_t j = 0; j < n; ++j) g.output_bias[j] += q[j];
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (auto* v : {&g.embedding, &g.output_weights, &g.output_bias})
    for (auto& x : *v) x *= scale;
  return loss * scale;
}

// Mean loss only, for evaluation and finite-difference checks.
inline double mean_loss(const TinyLmParams& p, std::span<const TrainingExample> batch, const NormTable* table) {
  std::vector<ProbRow> rows;
  TargetSequence t;
  for (const auto& ex : batch) {
    rows.push_back(forward(p, ex.prev));
    t.targets.push_back(ex.target);
    t.prevs.push_back(ex.prev);
  }
  return table ? normalized_cross_entropy(rows, t, *table) : cross_entropy(rows, t);
}

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  TinyLmParams params;
  std::vector<double> epoch_losses;  // mean loss over each epoch's examples
  std::vector<double> step_losses;   // mean loss of each minibatch
};

namespace detail {

class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& cfg) : m_(n, 0.0), v_(n, 0.0), cfg_(cfg) {}

  void step(std::vector<double>& params, const std::vector<double>& grad, std::uint64_t t) {
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.adam_epsilon);
    }
  }

 private:
  std::vector<double> m_, v_;
  const TrainConfig& cfg_;
};

}  // namespace detail

// Minibatch Adam. Each epoch visits every training pair once in an order drawn
// from a stream keyed by (seed, epoch).
inline TrainResult train(TinyLmParams params, std::span<const TokenSequence> corpus, const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw Error("train: empty corpus");
  auto examples = training_examples(corpus);
  for (const auto& ex : examples)
    if (ex.prev >= params.vocab_size || ex.target >= params.vocab_size)
      throw Error("train: corpus contains ids outside the model vocabulary");

  const NormTable* table = cfg.loss_mode == LossMode::Normalized ? cfg.norm_table.get() : nullptr;
  detail::Adam adam_e(params.embedding.size(), cfg), adam_w(params.output_weights.size(), cfg),
      adam_b(params.output_bias.size(), cfg);
  Gradients g;
  TrainResult result;
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::Rng rng(cfg.seed, /*stream=*/1000 + epoch);
    rng.shuffle(std::span<TrainingExample>(examples));
    double epoch_loss = 0.0;
    for (std::size_t lo = 0; lo < examples.size(); lo += cfg.batch_size) {
      const auto batch = std::span<const TrainingExample>(examples).subspan(
          lo, std::min(cfg.batch_size, examples.size() - lo));
      const double loss = loss_and_gradient(params, batch, table, g);
      if (!std::isfinite(loss))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                            std::to_string(t + 1));
      ++t;
      adam_e.step(params.embedding, g.embedding, t);
      adam_w.step(params.output_weights, g.output_weights, t);
      adam_b.step(params.output_bias, g.output_bias, t);
      result.step_losses.push_back(loss);
      epoch_loss += loss * static_cast<double>(batch.size());
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(examples.size()));
  }
  result.params = std::move(params);
  return result;
}

enum class DecodeStrategy { Greedy, Sample };

struct DecodeConfig {
  DecodeStrategy strategy = DecodeStrategy::Greedy;
  double temperature = 1.0;
  std::size_t max_len = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(temperature > 0.0)) throw Error("decode: temperature must be > 0");
    if (max_len < 1) throw Error("decode: max_len must be >= 1");
  }
};

// Greedy ties go to the lowest id.
inline TokenId pick_token(std::span<const double> p, const DecodeConfig& cfg, detail::Rng& rng) {
  if (cfg.strategy == DecodeStrategy::Greedy)
    return static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
  std::vector<double> q(p.begin(), p.end());
  if (cfg.temperature != 1.0) {
    for (auto& v : q) v = v > 0.0 ? std::pow(v, 1.0 / cfg.temperature) : 0.0;
  }
  double total = 0.0;
  for (double v : q) total += v;
  double u = rng.uniform() * total;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (u < q[j]) return static_cast<TokenId>(j);
    u -= q[j];
  }
  // rounding left u just above the last bucket
  for (std::size_t j = q.size(); j-- > 0;)
    if (q[j] > 0.0) return static_cast<TokenId>(j);
  return 0;
}

// Decodes from prompt until EOS or max_len draws. EOS is not part of the
// result. A table, when given, reweights every step's distribution.
inline TokenSequence generate(const TinyLmParams& params, TokenId prompt, const DecodeConfig& cfg,
                              const NormTable* table, detail::Rng& rng) {
  cfg.validate();
  TokenSequence out;
  TokenId prev = prompt;
  for (std::size_t step = 0; step < cfg.max_len; ++step) {
    auto p = forward(params, prev);
    if (table) p = apply_norm(p, prev, *table);
    const TokenId next = pick_token(p, cfg, rng);
    if (next == kEosId) break;
    out.ids.push_back(next);
    prev = next;
  }
  return out;
}

inline TokenSequence generate(const TinyLmParams& params, TokenId prompt, const DecodeConfig& cfg,
                              const NormTable* table = nullptr) {
  detail::Rng rng(cfg.seed, /*stream=*/2);
  return generate(params, prompt, cfg, table, rng);
}

// A trained model with everything needed to encode prompts and decode output.
struct Checkpoint {
  TinyLmParams params;
  Vocabulary vocab;
  TokenizerConfig tokenizer;
};

// Checkpoint file (text, lossless):
//   #TINYLM v1 <vocab_size> <dim> <vocab_fingerprint>
//   #TOKENIZER <lowercase> <mask_numbers> <split_punctuation>
//   embedded vocabulary file (see save_vocab)
//   #EMBEDDING       vocab_size lines of dim values
//   #OUTPUT_WEIGHTS  dim lines of vocab_size values
//   #OUTPUT_BIAS     one line of vocab_size values
// Values are space separated shortest round-trip decimals.
inline void save_checkpoint(const Checkpoint& ck, std::ostream& out) {
  const auto& p = ck.params;
  if (p.vocab_size != ck.vocab.size()) throw Error("save_checkpoint: model and vocabulary sizes differ");
  out << "#TINYLM v1 " << p.vocab_size << ' ' << p.dim << ' ' << detail::hex64(ck.vocab.fingerprint()) << '\n';
  out << "#TOKENIZER " << ck.tokenizer.lowercase << ' ' << ck.tokenizer.mask_numbers << ' '
      << ck.tokenizer.split_punctuation << '\n';
  save_vocab(ck.vocab, out);
  auto rows = [&](const char* tag, const std::vector<double>& v, std::size_t nrows, std::size_t ncols) {
    out << tag << '\n';
    for (std::size_t r = 0; r < nrows; ++r) {
      for (std::size_t c = 0; c < ncols; ++c) {
        if (c) out << ' ';
        out << detail::format_double(v[r * ncols + c]);
      }
      out << '\n';
    }
  };
  rows("#EMBEDDING", p.embedding, p.vocab_size, p.dim);
  rows("#OUTPUT_WEIGHTS", p.output_weights, p.dim, p.vocab_size);
  rows("#OUTPUT_BIAS", p.output_bias, 1, p.vocab_size);
}

inline Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError("checkpoint: truncated", line_no + 1);
    ++line_no;
    return line;
  };
  auto h = detail::split(next_line(), ' ');
  if (h.size() != 5 || h[0] != "#TINYLM" || h[1] != "v1") throw ParseError("checkpoint: bad header", line_no);
  Checkpoint ck;
  ck.params.vocab_size = detail::parse_u64(h[2], line_no);
  ck.params.dim = detail::parse_u64(h[3], line_no);
  const auto fingerprint = detail::parse_hex64(h[4], line_no);

  auto t = detail::split(next_line(), ' ');
  if (t.size() != 4 || t[0] != "#TOKENIZER") throw ParseError("checkpoint: bad tokenizer line", line_no);
  auto flag = [&](std::string_view s) {
    if (s != "0" && s != "1") throw ParseError("checkpoint: tokenizer flags must be 0 or 1", line_no);
    return s == "1";
  };
  ck.tokenizer = {flag(t[1]), flag(t[2]), flag(t[3])};

  // The vocabulary block has a self-describing length.
  std::string vocab_text = next_line() + '\n';
  const auto vh = detail::split(line, ' ');
  if (vh.size() != 4) throw ParseError("checkpoint: bad vocabulary header", line_no);
  const auto vocab_lines = detail::parse_u64(vh[2], line_no);
  for (std::uint64_t i = 0; i < vocab_lines; ++i) vocab_text += next_line() + '\n';
  std::istringstream vocab_in(vocab_text);
  ck.vocab = load_vocab(vocab_in);
  if (ck.vocab.fingerprint() != fingerprint || ck.vocab.size() != ck.params.vocab_size)
    throw ParseError("checkpoint: vocabulary does not match header", line_no);

  auto read_rows = [&](const char* tag, std::vector<double>& v, std::size_t nrows, std::size_t ncols) {
    if (next_line() != tag) throw ParseError(std::string("checkpoint: expected ") + tag, line_no);
    v.clear();
    v.reserve(nrows * ncols);
    for (std::size_t r = 0; r < nrows; ++r) {
      auto f = detail::split_ws(next_line());
      if (f.size() != ncols) throw ParseError("checkpoint: expected " + std::to_string(ncols) + " values", line_no);
      for (auto s : f) {
        const double x = detail::parse_double(s, line_no);
        if (!std::isfinite(x)) throw ParseError("checkpoint: non-finite parameter", line_no);
        v.push_back(x);
      }
    }
  };
  auto& p = ck.params;
  read_rows("#EMBEDDING", p.embedding, p.vocab_size, p.dim);
  read_rows("#OUTPUT_WEIGHTS", p.output_weights, p.dim, p.vocab_size);
  read_rows("#OUTPUT_BIAS", p.output_bias, 1, p.vocab_size);
  return ck;
}

}  // namespace longtail
