#pragma once

// Cross-entropy over normalized predictions and its gradient on logits.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "longtail/corpus.hpp"
#include "longtail/error.hpp"
#include "longtail/normalization.hpp"

namespace longtail {

using ProbRow = std::vector<double>;
using LogitRow = std::vector<double>;

// One-hot targets and the preceding token at each position (BOS first).
struct TargetSequence {
  std::vector<TokenId> targets;
  std::vector<TokenId> prevs;

  // Targets t1..tm followed by EOS, contexts BOS t1..tm.
  static TargetSequence from_sentence(const TokenSequence& s) {
    TargetSequence t;
    TokenId prev = kBosId;
    for (auto id : s.ids) {
      t.targets.push_back(id);
      t.prevs.push_back(prev);
      prev = id;
    }
    t.targets.push_back(kEosId);
    t.prevs.push_back(prev);
    return t;
  }

  std::size_t size() const { return targets.size(); }
};

namespace detail {

inline void check_alignment(std::size_t rows, const TargetSequence& t, const char* who) {
  if (t.targets.size() != t.prevs.size()) throw Error(std::string(who) + ": targets and prevs differ in length");
  if (rows != t.targets.size()) throw Error(std::string(who) + ": row count does not match target count");
  if (rows == 0) throw Error(std::string(who) + ": empty sequence");
}

inline double neg_log_target(std::span<const double> row, TokenId target, std::size_t position) {
  if (target >= row.size()) throw Error("cross_entropy: target id out of range at position " + std::to_string(position));
  const double p = row[target];
  if (!(p > 0.0))
    throw Error("cross_entropy: zero probability on the target at position " + std::to_string(position));
  return -std::log(p);
}

}  // namespace detail

// (1/M) sum_i -ln p_hat[i][y_i], in nats.
inline double cross_entropy(std::span<const ProbRow> p_hat, const TargetSequence& targets) {
  detail::check_alignment(p_hat.size(), targets, "cross_entropy");
  double loss = 0.0;
  for (std::size_t i = 0; i < p_hat.size(); ++i) loss += detail::neg_log_target(p_hat[i], targets.targets[i], i);
  return loss / static_cast<double>(p_hat.size());
}

// Cross-entropy of the rows after apply_norm with each position's context.
inline double normalized_cross_entropy(std::span<const ProbRow> p_hat, const TargetSequence& targets,
                                       const NormTable& table) {
  detail::check_alignment(p_hat.size(), targets, "normalized_cross_entropy");
  double loss = 0.0;
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    const auto p_norm = apply_norm(p_hat[i], targets.prevs[i], table);
    loss += detail::neg_log_target(p_norm, targets.targets[i], i);
  }
  return loss / static_cast<double>(p_hat.size());
}

// Weighted softmax p'_j = w_j exp(z_j) / sum_k w_k exp(z_k), max-shifted.
inline void weighted_softmax(std::span<const double> logits, std::span<const double> weights, std::span<double> out) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = weights[j] * std::exp(logits[j] - zmax);
    z += out[j];
  }
  for (auto& v : out) v /= z;
}

inline ProbRow softmax(std::span<const double> logits) {
  ProbRow out(logits.size());
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - zmax);
    z += out[j];
  }
  for (auto& v : out) v /= z;
  return out;
}

// Gradient of -ln p'_target with respect to the logits: p' - onehot(target).
inline std::vector<double> normalized_ce_gradient(std::span<const double> logits, TokenId target, TokenId prev,
                                                  const NormTable& table) {
  if (logits.empty()) throw Error("normalized_ce_gradient: empty logits");
  if (target >= logits.size()) throw Error("normalized_ce_gradient: target out of range");
  for (double z : logits)
    if (!std::isfinite(z)) throw Error("normalized_ce_gradient: non-finite logit");
  std::vector<double> weights = table.dense_weights(prev, logits.size());
  std::vector<double> grad(logits.size());
  weighted_softmax(logits, weights, grad);
  grad[target] -= 1.0;
  return grad;
}

}  // namespace longtail
