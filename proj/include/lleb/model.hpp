/*
 * Copyright 2026 The lleb Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lleb/embedding.hpp"
#include "lleb/error.hpp"
#include "lleb/random.hpp"
#include "lleb/session.hpp"
#include "lleb/vocab.hpp"

namespace lleb {

enum class Aggregator { MeanPool, ElmanRecurrent };

inline std::string to_string(Aggregator agg) {
  return agg == Aggregator::MeanPool ? "mean" : "elman";
}

// embedding -> aggregator -> affine -> sigmoid.
//
// MeanPool:        h = mean_i emb[id_i]
// ElmanRecurrent:  h_t = tanh(W_h h_{t-1} + W_x emb[id_t] + b_h), h_0 = 0, h = h_L
// output:          p = sigmoid(w_out . h + b_out)
//
// W_h and W_x are N x N, row-major; they and b_h stay empty under MeanPool.
struct ClassifierParams {
  EmbeddingMatrix emb;
  Aggregator agg = Aggregator::MeanPool;
  std::vector<double> w_h;
  std::vector<double> w_x;
  std::vector<double> b_h;
  std::vector<double> w_out;
  double b_out = 0.0;

  std::size_t dim() const noexcept { return emb.dim(); }

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs_per_segment = 5;
  std::size_t minibatch_size = 32;
  std::size_t max_sequence_length = 50;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw InvalidInput("adam_beta1 must be in (0,1)");
    if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw InvalidInput("adam_beta2 must be in (0,1)");
    if (!(adam_eps > 0.0)) throw InvalidInput("adam_eps must be positive");
    if (minibatch_size == 0) throw InvalidInput("minibatch_size must be positive");
    if (max_sequence_length == 0) throw InvalidInput("max_sequence_length must be positive");
  }
};

struct LabeledSequence {
  std::vector<TokenId> ids;
  int label = 0;
};

// Gradient bundle. Embedding gradients are sparse: only rows that occur in the
// minibatch have an entry.
struct Gradients {
  std::unordered_map<std::uint32_t, std::vector<double>> emb;
  std::vector<double> w_h;
  std::vector<double> w_x;
  std::vector<double> b_h;
  std::vector<double> w_out;
  double b_out = 0.0;
};

// Adam moments shaped like ClassifierParams. Embedding rows become "active"
// the first time they receive a gradient; inactive rows have zero moments and
// are skipped, which is exactly what dense Adam would do to them.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m_emb, v_emb;
  std::vector<char> active;
  std::vector<std::uint32_t> active_rows;
  std::vector<double> m_w_h, v_w_h, m_w_x, v_w_x, m_b_h, v_b_h, m_w_out, v_w_out;
  double m_b_out = 0.0, v_b_out = 0.0;

  static AdamState for_params(const ClassifierParams& p) {
    AdamState s;
    s.m_emb.assign(p.emb.data().size(), 0.0);
    s.v_emb.assign(p.emb.data().size(), 0.0);
    s.active.assign(p.emb.rows(), 0);
    s.m_w_h.assign(p.w_h.size(), 0.0);
    s.v_w_h.assign(p.w_h.size(), 0.0);
    s.m_w_x.assign(p.w_x.size(), 0.0);
    s.v_w_x.assign(p.w_x.size(), 0.0);
    s.m_b_h.assign(p.b_h.size(), 0.0);
    s.v_b_h.assign(p.b_h.size(), 0.0);
    s.m_w_out.assign(p.w_out.size(), 0.0);
    s.v_w_out.assign(p.w_out.size(), 0.0);
    return s;
  }
};

inline constexpr double kProbabilityClamp = 1e-12;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Zero-initialised parameters around an existing embedding.
inline ClassifierParams make_params(EmbeddingMatrix emb, Aggregator agg) {
  ClassifierParams p;
  const std::size_t n = emb.dim();
  p.emb = std::move(emb);
  p.agg = agg;
  if (agg == Aggregator::ElmanRecurrent) {
    p.w_h.assign(n * n, 0.0);
    p.w_x.assign(n * n, 0.0);
    p.b_h.assign(n, 0.0);
  }
  p.w_out.assign(n, 0.0);
  return p;
}

// Uniform(-1/sqrt(N), 1/sqrt(N)) aggregator and output weights, zero biases.
inline void init_head(ClassifierParams& p, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.dim()));
  for (double& w : p.w_h) w = rng.uniform(-bound, bound);
  for (double& w : p.w_x) w = rng.uniform(-bound, bound);
  std::fill(p.b_h.begin(), p.b_h.end(), 0.0);
  for (double& w : p.w_out) w = rng.uniform(-bound, bound);
  p.b_out = 0.0;
}

namespace detail {

inline void check_ids(const ClassifierParams& p, std::span<const TokenId> ids) {
  if (ids.empty()) throw InvalidInput("cannot score an empty sequence");
  for (auto id : ids) {
    if (id.value >= p.emb.rows()) {
      throw Defect("token id " + std::to_string(id.value) + " out of range for embedding with " +
                   std::to_string(p.emb.rows()) + " rows");
    }
  }
}

// Hidden states h_1..h_L (Elman) or just the pooled vector (MeanPool), plus
// the logit.
struct ForwardTrace {
  std::vector<std::vector<double>> hidden;
  double logit = 0.0;
};

inline ForwardTrace trace(const ClassifierParams& p, std::span<const TokenId> ids) {
  check_ids(p, ids);
  const std::size_t n = p.dim();
  ForwardTrace t;
  if (p.agg == Aggregator::MeanPool) {
    std::vector<double> h(n, 0.0);
    for (auto id : ids) {
      auto x = p.emb.row(id.value);
      for (std::size_t k = 0; k < n; ++k) h[k] += x[k];
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (double& v : h) v *= inv;
    t.hidden.push_back(std::move(h));
  } else {
    std::vector<double> prev(n, 0.0);
    t.hidden.reserve(ids.size());
    for (auto id : ids) {
      auto x = p.emb.row(id.value);
      std::vector<double> h(n);
      for (std::size_t r = 0; r < n; ++r) {
        double a = p.b_h[r];
        const double* wh = p.w_h.data() + r * n;
        const double* wx = p.w_x.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) a += wh[c] * prev[c] + wx[c] * x[c];
        h[r] = std::tanh(a);
      }
      t.hidden.push_back(h);
      prev = std::move(h);
    }
  }
  const auto& h = t.hidden.back();
  t.logit = p.b_out;
  for (std::size_t k = 0; k < n; ++k) t.logit += p.w_out[k] * h[k];
  return t;
}

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

inline double bce(double p, int label, double pos_weight) {
  p = clamp_probability(p);
  return -(pos_weight * label * std::log(p) + (1 - label) * std::log(1.0 - p));
}

}  // namespace detail

// Purchase probability, clamped into [1e-12, 1 - 1e-12].
inline double forward(const ClassifierParams& p, std::span<const TokenId> ids) {
  return detail::clamp_probability(sigmoid(detail::trace(p, ids).logit));
}

// Weighted binary cross-entropy of one sequence.
inline double loss(const ClassifierParams& p, std::span<const TokenId> ids, int label,
                   double pos_weight = 1.0) {
  return detail::bce(sigmoid(detail::trace(p, ids).logit), label, pos_weight);
}

inline double batch_loss(const ClassifierParams& p, std::span<const LabeledSequence> batch,
                         double pos_weight) {
  if (batch.empty()) throw InvalidInput("empty minibatch");
  double total = 0.0;
  for (const auto& ex : batch) total += loss(p, ex.ids, ex.label, pos_weight);
  return total / static_cast<double>(batch.size());
}

// Analytic gradient of batch_loss.
inline Gradients gradients(const ClassifierParams& p, std::span<const LabeledSequence> batch,
                           double pos_weight) {
  if (batch.empty()) throw InvalidInput("empty minibatch");
  const std::size_t n = p.dim();
  const double scale = 1.0 / static_cast<double>(batch.size());
  Gradients g;
  g.w_h.assign(p.w_h.size(), 0.0);
  g.w_x.assign(p.w_x.size(), 0.0);
  g.b_h.assign(p.b_h.size(), 0.0);
  g.w_out.assign(n, 0.0);

  auto emb_grad = [&](TokenId id) -> std::vector<double>& {
    auto [it, inserted] = g.emb.try_emplace(id.value);
    if (inserted) it->second.assign(n, 0.0);
    return it->second;
  };

  std::vector<double> dh(n), da(n), dprev(n);
  for (const auto& ex : batch) {
    const auto t = detail::trace(p, ex.ids);
    const double prob = sigmoid(t.logit);
    const int y = ex.label;
    // d loss / d logit for weighted BCE through the sigmoid.
    const double dz = scale * (pos_weight * y * (prob - 1.0) + (1 - y) * prob);

    const auto& h_last = t.hidden.back();
    g.b_out += dz;
    for (std::size_t k = 0; k < n; ++k) {
      g.w_out[k] += dz * h_last[k];
      dh[k] = dz * p.w_out[k];
    }

    if (p.agg == Aggregator::MeanPool) {
      const double inv = 1.0 / static_cast<double>(ex.ids.size());
      for (auto id : ex.ids) {
        auto& row = emb_grad(id);
        for (std::size_t k = 0; k < n; ++k) row[k] += dh[k] * inv;
      }
      continue;
    }

    // Backpropagation through time.
    for (std::size_t step = ex.ids.size(); step-- > 0;) {
      const auto& h = t.hidden[step];
      const std::vector<double>* prev = step > 0 ? &t.hidden[step - 1] : nullptr;
      auto x = p.emb.row(ex.ids[step].value);
      for (std::size_t r = 0; r < n; ++r) da[r] = dh[r] * (1.0 - h[r] * h[r]);
      std::fill(dprev.begin(), dprev.end(), 0.0);
      auto& dx = emb_grad(ex.ids[step]);
      for (std::size_t r = 0; r < n; ++r) {
        g.b_h[r] += da[r];
        const double* wh = p.w_h.data() + r * n;
        const double* wx = p.w_x.data() + r * n;
        double* gwh = g.w_h.data() + r * n;
        double* gwx = g.w_x.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) {
          if (prev) gwh[c] += da[r] * (*prev)[c];
          gwx[c] += da[r] * x[c];
          dx[c] += wx[c] * da[r];
          dprev[c] += wh[c] * da[r];
        }
      }
      std::swap(dh, dprev);
    }
  }
  return g;
}

namespace detail {

struct AdamCoefficients {
  double lr, b1, b2, eps, bias1, bias2;
};

inline void adam_update(double& theta, double& m, double& v, double grad,
                        const AdamCoefficients& c) {
  m = c.b1 * m + (1.0 - c.b1) * grad;
  v = c.b2 * v + (1.0 - c.b2) * grad * grad;
  const double m_hat = m / c.bias1;
  const double v_hat = v / c.bias2;
  theta -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
}

inline void adam_dense(std::vector<double>& theta, std::vector<double>& m, std::vector<double>& v,
                       const std::vector<double>& grad, const AdamCoefficients& c) {
  if (theta.size() != grad.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw Defect("adam: parameter/gradient shape mismatch");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) adam_update(theta[i], m[i], v[i], grad[i], c);
}

}  // namespace detail

inline void adam_step(ClassifierParams& p, const Gradients& g, AdamState& s,
                      const TrainConfig& config) {
  if (s.m_emb.size() != p.emb.data().size() || s.active.size() != p.emb.rows()) {
    throw Defect("adam state does not match parameter shapes");
  }
  ++s.step;
  const double t = static_cast<double>(s.step);
  const detail::AdamCoefficients c{config.learning_rate,
                                   config.adam_beta1,
                                   config.adam_beta2,
                                   config.adam_eps,
                                   1.0 - std::pow(config.adam_beta1, t),
                                   1.0 - std::pow(config.adam_beta2, t)};

  for (const auto& [row, grad] : g.emb) {
    if (row >= s.active.size()) throw Defect("gradient row out of range");
    if (!s.active[row]) {
      s.active[row] = 1;
      s.active_rows.push_back(row);
    }
  }
  const std::size_t n = p.dim();
  for (auto row : s.active_rows) {
    auto it = g.emb.find(row);
    auto theta = p.emb.row(row);
    for (std::size_t k = 0; k < n; ++k) {
      const double grad = it == g.emb.end() ? 0.0 : it->second[k];
      detail::adam_update(theta[k], s.m_emb[row * n + k], s.v_emb[row * n + k], grad, c);
    }
  }
  detail::adam_dense(p.w_h, s.m_w_h, s.v_w_h, g.w_h, c);
  detail::adam_dense(p.w_x, s.m_w_x, s.v_w_x, g.w_x, c);
  detail::adam_dense(p.b_h, s.m_b_h, s.v_b_h, g.b_h, c);
  detail::adam_dense(p.w_out, s.m_w_out, s.v_w_out, g.w_out, c);
  detail::adam_update(p.b_out, s.m_b_out, s.v_b_out, g.b_out, c);
}

// Maps a session's items through the vocabulary (OOV -> UNK), keeping the most
// recent max_length items. Returns an empty sequence for an empty session.
inline std::vector<TokenId> encode_session(const VocabMap& vocab, const Session& session,
                                           std::size_t max_length) {
  const std::size_t skip = session.items.size() > max_length ? session.items.size() - max_length : 0;
  std::vector<TokenId> ids;
  ids.reserve(session.items.size() - skip);
  for (std::size_t i = skip; i < session.items.size(); ++i) {
    ids.push_back(vocab.lookup(session.items[i].token));
  }
  return ids;
}

// negatives / positives, clamped to [1, 50].
inline double positive_weight(std::span<const LabeledSequence> data) {
  std::size_t pos = 0;
  for (const auto& ex : data) pos += ex.label == 1;
  const std::size_t neg = data.size() - pos;
  if (pos == 0) return 50.0;
  return std::clamp(static_cast<double>(neg) / static_cast<double>(pos), 1.0, 50.0);
}

// One training week: epochs_per_segment shuffled passes of minibatch Adam with
// fresh optimizer state. Sessions without items are ignored.
inline void train_segment(ClassifierParams& p, const VocabMap& vocab,
                          std::span<const Session> sessions, const TrainConfig& config,
                          std::uint64_t seed) {
  config.validate();
  if (sessions.empty()) throw InvalidInput("cannot train on an empty segment");
  if (p.emb.rows() != vocab.size()) throw Defect("embedding rows do not match vocabulary size");
  std::vector<LabeledSequence> data;
  data.reserve(sessions.size());
  for (const auto& s : sessions) {
    auto ids = encode_session(vocab, s, config.max_sequence_length);
    if (!ids.empty()) data.push_back({std::move(ids), s.label});
  }
  if (data.empty()) throw InvalidInput("segment has no non-empty sessions");
  if (config.epochs_per_segment == 0) return;

  const double pos_weight = positive_weight(data);
  AdamState state = AdamState::for_params(p);
  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LabeledSequence> batch;
  for (std::size_t epoch = 0; epoch < config.epochs_per_segment; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += config.minibatch_size) {
      const std::size_t stop = std::min(order.size(), start + config.minibatch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
      adam_step(p, gradients(p, batch, pos_weight), state, config);
    }
  }
}

// One probability per session, in input order; empty sessions yield nullopt.
inline std::vector<std::optional<double>> score_sessions(const ClassifierParams& p,
                                                         const VocabMap& vocab,
                                                         std::span<const Session> sessions,
                                                         std::size_t max_length = 50) {
  std::vector<std::optional<double>> scores;
  scores.reserve(sessions.size());
  for (const auto& s : sessions) {
    auto ids = encode_session(vocab, s, max_length);
    if (ids.empty()) {
      scores.emplace_back();
    } else {
      scores.emplace_back(forward(p, ids));
    }
  }
  return scores;
}

}  // namespace lleb
