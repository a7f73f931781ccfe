// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_RERANKER_HPP
#define DPA_RERANKER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpa/embedding_store.hpp"
#include "dpa/errors.hpp"
#include "dpa/rng.hpp"
#include "dpa/types.hpp"
#include "json.hpp"

namespace dpa {

using Vec = std::vector<double>;

/// Bilinear scorer over frozen embeddings: score(q, d) = q' W d + b.
/// Training happens in 64-bit; the on-disk form rounds W to float32.
struct RerankerModel {
  std::size_t dim = 0;
  Vec W;          // row-major dim x dim
  double b = 0.0;
  double tau = 0.07;  // SCL temperature

  double score(std::span<const double> q, std::span<const double> d) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      double row = 0.0;
      const double* w = W.data() + i * dim;
      for (std::size_t j = 0; j < dim; ++j) row += w[j] * d[j];
      acc += q[i] * row;
    }
    return acc + b;
  }

  /// Document-side projection W e (used by the contrastive loss).
  Vec project_doc(std::span<const double> e) const {
    Vec out(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      const double* w = W.data() + i * dim;
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) acc += w[j] * e[j];
      out[i] = acc;
    }
    return out;
  }

  /// Query-side projection W' e.
  Vec project_query(std::span<const double> e) const {
    Vec out(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      const double* w = W.data() + i * dim;
      for (std::size_t j = 0; j < dim; ++j) out[j] += w[j] * e[i];
    }
    return out;
  }

  void validate() const {
    if (dim == 0 || W.size() != dim * dim) {
      throw std::invalid_argument("model W must be dim x dim");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
    for (double w : W) {
      if (!std::isfinite(w)) throw std::invalid_argument("model W must be finite");
    }
    if (!std::isfinite(b)) throw std::invalid_argument("model bias must be finite");
  }
};

/// Seeded Gaussian init; b starts at zero.
inline RerankerModel init_model(std::size_t dim, std::uint64_t seed,
                                double init_scale = 0.01, double tau = 0.07) {
  RerankerModel model;
  model.dim = dim;
  model.tau = tau;
  model.W.resize(dim * dim);
  SplitMix64 rng(seed ^ 0xA5C1EDB00B5ULL);
  for (auto& w : model.W) w = init_scale * rng.next_gaussian();
  return model;
}

inline void save_model(const RerankerModel& model, const std::string& path_prefix,
                       const std::string& config_hash = {}) {
  model.validate();
  EmbeddingStore rows(static_cast<std::uint32_t>(model.dim));
  std::vector<float> row(model.dim);
  for (std::size_t i = 0; i < model.dim; ++i) {
    for (std::size_t j = 0; j < model.dim; ++j) {
      row[j] = static_cast<float>(model.W[i * model.dim + j]);
    }
    char id[16];
    std::snprintf(id, sizeof id, "w%04zu", i);
    rows.add(id, row);
  }
  save_store(rows, path_prefix + ".dpae");

  nlohmann::ordered_json header;
  header["dim"] = model.dim;
  header["b"] = model.b;
  header["tau"] = model.tau;
  header["config_hash"] = config_hash;
  std::ofstream out(path_prefix + ".json", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path_prefix + ".json");
  out << header.dump(2) << '\n';
}

inline RerankerModel load_model(const std::string& path_prefix) {
  const auto rows = load_store(path_prefix + ".dpae");
  std::ifstream in(path_prefix + ".json", std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path_prefix + ".json");
  nlohmann::ordered_json header = nlohmann::ordered_json::parse(in);

  RerankerModel model;
  model.dim = header.at("dim").get<std::size_t>();
  model.b = header.at("b").get<double>();
  model.tau = header.at("tau").get<double>();
  if (model.dim != rows.dim() || rows.count() != model.dim) {
    throw FormatError(FormatError::Kind::SizeMismatch,
                      "model header dim disagrees with weight matrix");
  }
  model.W.resize(model.dim * model.dim);
  for (std::size_t i = 0; i < model.dim; ++i) {
    const auto r = rows.row(i);
    for (std::size_t j = 0; j < model.dim; ++j) {
      model.W[i * model.dim + j] = static_cast<double>(r[j]);
    }
  }
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Preference-score fusion and ordering
// ---------------------------------------------------------------------------

/// s = a * r + (1 - a) * s_R, the reader/retriever score fusion.
inline double fuse_score(double r, double s_r, double a) {
  if (!(a >= 0.0 && a <= 1.0)) {
    throw std::invalid_argument("fusion weight a must lie in [0, 1]");
  }
  return a * r + (1.0 - a) * s_r;
}

/// Min-max normalization onto [0, 1]; a constant vector maps to all 0.5.
inline Vec normalize_ratings(const Vec& scores) {
  if (scores.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, hi = *hi_it;
  Vec out(scores.size());
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 0.5);
  } else {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out[i] = (scores[i] - lo) / (hi - lo);
    }
  }
  return out;
}

/// Fused per-document scores plus the induced permutation. `order[0]` is the
/// best position; ties resolve by ascending original retriever rank.
struct PreferenceOrder {
  Vec scores;
  std::vector<std::size_t> order;
};

inline std::vector<std::size_t> sort_by_score(const Vec& scores,
                                              const std::vector<int>& retriever_ranks) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return retriever_ranks[a] < retriever_ranks[b];
  });
  return order;
}

inline PreferenceOrder build_order(const Vec& llm_scores, const Vec& retriever_scores,
                                   const std::vector<int>& retriever_ranks, double a) {
  if (llm_scores.size() != retriever_scores.size() ||
      llm_scores.size() != retriever_ranks.size()) {
    throw std::invalid_argument("build_order inputs must have equal length");
  }
  PreferenceOrder result;
  result.scores.resize(llm_scores.size());
  for (std::size_t i = 0; i < llm_scores.size(); ++i) {
    result.scores[i] = fuse_score(llm_scores[i], retriever_scores[i], a);
  }
  result.order = sort_by_score(result.scores, retriever_ranks);
  return result;
}

/// Round-robin comparison ordering: runs all C(k,2) duels through the
/// comparator and ranks by win count, ties by retriever rank. The scores
/// vector holds win counts.
inline PreferenceOrder pairwise_order(
    std::size_t k, const std::vector<int>& retriever_ranks,
    const std::function<bool(std::size_t, std::size_t)>& first_wins) {
  if (retriever_ranks.size() != k) {
    throw std::invalid_argument("retriever_ranks must have k entries");
  }
  PreferenceOrder result;
  result.scores.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (first_wins(i, j)) {
        result.scores[i] += 1.0;
      } else {
        result.scores[j] += 1.0;
      }
    }
  }
  result.order = sort_by_score(result.scores, retriever_ranks);
  return result;
}

/// All C(k,2) (winner, loser) pairs implied by a preference order, winners
/// enumerated outer-first.
inline std::vector<std::pair<std::size_t, std::size_t>> make_pairs(
    const PreferenceOrder& order) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const auto& o = order.order;
  for (std::size_t u = 0; u < o.size(); ++u) {
    for (std::size_t v = u + 1; v < o.size(); ++v) {
      pairs.emplace_back(o[u], o[v]);
    }
  }
  return pairs;
}

}  // namespace dpa

#endif  // DPA_RERANKER_HPP
