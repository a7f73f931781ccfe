// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_TRAIN_HPP
#define DPA_TRAIN_HPP

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpa/embedding_store.hpp"
#include "dpa/gateway.hpp"
#include "dpa/losses.hpp"
#include "dpa/mgda.hpp"
#include "dpa/pref_data.hpp"
#include "dpa/reranker.hpp"
#include "dpa/rng.hpp"

namespace dpa {

enum class OrderingMode { Logit, Rating, Pairwise };

inline OrderingMode ordering_mode_from(const std::string& s) {
  if (s == "logit") return OrderingMode::Logit;
  if (s == "rating") return OrderingMode::Rating;
  if (s == "pairwise") return OrderingMode::Pairwise;
  throw std::invalid_argument("unknown score mode: " + s);
}

struct TrainConfig {
  std::uint64_t seed = 1234;
  double lr = 0.05;
  int epochs = 10;
  std::size_t batch_size = 32;
  double a = 0.8;                    // reader/retriever fusion weight
  double tau = 0.07;                 // SCL temperature
  int mgda_every = 1;                // recompute task weights every N steps
  OrderingMode ordering = OrderingMode::Logit;
  std::optional<std::array<double, 3>> fixed_weights;  // set to bypass MGDA
  double init_scale = 0.01;
};

struct GroupDoc {
  std::string doc_id;
  Vec emb;
  int retriever_rank = 0;  // 1-based
  double retriever_score = 0.0;
  PreferenceLabel label = PreferenceLabel::BothIncorrect;
};

/// One preference sample prepared for the optimizer: embeddings resolved,
/// preference order fused and frozen into ranking pairs.
struct SampleGroup {
  std::string query_id;
  Vec q_emb;
  std::vector<GroupDoc> docs;
  PreferenceOrder order;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

struct TrainData {
  std::vector<SampleGroup> groups;
  std::size_t dim = 0;
};

namespace detail {

inline Vec widen(std::span<const float> v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]);
  return out;
}

}  // namespace detail

/// Resolves embeddings and retriever scores for every retained sample and
/// derives each sample's preference order. Logit and rating scores are both
/// min-max normalized over the subset before fusion so the two terms of the
/// fused score share a scale; pairwise mode ranks by round-robin wins
/// instead. Samples born from query augmentation resolve through their
/// origin query.
inline TrainData build_train_data(const std::vector<PreferenceSample>& samples,
                                  const std::map<std::string, QueryRecord>& queries,
                                  const std::map<std::string, Document>& corpus,
                                  const EmbeddingStore& store, Gateway& reader,
                                  const TrainConfig& cfg) {
  TrainData data;
  data.dim = store.dim();

  for (const auto& sample : samples) {
    const std::string& resolve_id =
        sample.origin_query_id ? *sample.origin_query_id : sample.query_id;
    auto qit = queries.find(resolve_id);
    if (qit == queries.end()) {
      throw std::invalid_argument("no query record for sample " + sample.query_id);
    }
    const QueryRecord& query = qit->second;
    const std::string& query_text = sample.aug_text ? *sample.aug_text : query.query;

    SampleGroup group;
    group.query_id = sample.query_id;
    group.q_emb = detail::widen(query.embedding);
    if (group.q_emb.size() != data.dim) {
      throw std::invalid_argument("query dim mismatch for " + sample.query_id);
    }

    std::vector<int> ranks;
    std::vector<PromptDoc> prompt_docs;
    Vec retriever_scores;
    for (const auto& entry : sample.subset) {
      GroupDoc doc;
      doc.doc_id = entry.doc_id;
      doc.emb = detail::widen(store.row_of(entry.doc_id));
      doc.retriever_rank = entry.rank;
      if (static_cast<std::size_t>(entry.rank) > query.retrieved.size()) {
        throw std::invalid_argument("subset rank deeper than retrieval list for " +
                                    sample.query_id);
      }
      doc.retriever_score =
          static_cast<double>(query.retrieved[entry.rank - 1].score);
      doc.label = entry.label;

      auto dit = corpus.find(entry.doc_id);
      if (dit == corpus.end()) {
        throw std::invalid_argument("subset doc missing from corpus: " + entry.doc_id);
      }
      prompt_docs.push_back({dit->second.title, dit->second.text});
      ranks.push_back(entry.rank);
      retriever_scores.push_back(doc.retriever_score);
      group.docs.push_back(std::move(doc));
    }

    if (cfg.ordering == OrderingMode::Pairwise) {
      group.order = pairwise_order(
          group.docs.size(), ranks, [&](std::size_t i, std::size_t j) {
            return compare_documents(reader, query_text, prompt_docs[i],
                                     prompt_docs[j]) == CompareWinner::A;
          });
    } else {
      Vec llm_scores;
      const ScoreMode mode = cfg.ordering == OrderingMode::Logit ? ScoreMode::Logit
                                                                 : ScoreMode::Rating;
      for (const auto& pd : prompt_docs) {
        llm_scores.push_back(score_document(reader, query_text, pd, mode));
      }
      group.order = build_order(normalize_ratings(llm_scores),
                                normalize_ratings(retriever_scores), ranks, cfg.a);
    }
    group.pairs = make_pairs(group.order);
    data.groups.push_back(std::move(group));
  }
  return data;
}

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double loss_point = 0.0;
  double loss_pair = 0.0;
  double loss_scl = 0.0;
  std::array<double, 3> weights{};
  double grad_norm = 0.0;
  bool mgda_degenerate = false;
};

using TrainHistory = std::vector<StepRecord>;

/// Raised when a loss turns non-finite; carries the failing step.
class TrainDivergence : public std::runtime_error {
 public:
  TrainDivergence(int step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(step) +
                           ": " + what),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

namespace detail {

struct StepBatches {
  std::vector<TrainExample> points;
  std::vector<TrainPair> pairs;
  std::vector<SclItem> scl;
};

/// Materializes the three task batches for a set of groups. SCL labels:
/// the query and its aligned documents share one label per group; unaligned
/// documents get unique labels so they act purely as negatives.
inline StepBatches make_batches(const TrainData& data,
                                const std::vector<std::size_t>& group_idx) {
  StepBatches b;
  int next_label = 0;
  for (const std::size_t gi : group_idx) {
    const SampleGroup& g = data.groups[gi];
    const int group_label = next_label++;
    b.scl.push_back({g.q_emb, true, group_label});
    for (const auto& doc : g.docs) {
      if (doc.label == PreferenceLabel::AlignedKnowledge) {
        b.points.push_back({g.query_id, doc.doc_id, g.q_emb, doc.emb, 1});
        b.scl.push_back({doc.emb, false, group_label});
      } else if (doc.label == PreferenceLabel::UnalignedKnowledge) {
        b.points.push_back({g.query_id, doc.doc_id, g.q_emb, doc.emb, 0});
        b.scl.push_back({doc.emb, false, next_label++});
      }
    }
    for (const auto& [w, l] : g.pairs) {
      b.pairs.push_back({g.q_emb, g.docs[w].emb, g.docs[l].emb});
    }
  }
  return b;
}

}  // namespace detail

/// Plain SGD over the MGDA-weighted sum of the three alignment losses.
/// Deterministic given the seed: shuffling uses the project's own
/// Fisher-Yates, and every reduction has a fixed order.
inline TrainHistory train(RerankerModel& model, const TrainData& data,
                          const TrainConfig& cfg) {
  model.validate();
  if (model.dim != data.dim) {
    throw std::invalid_argument("model dim != training data dim");
  }
  if (data.groups.empty()) {
    throw std::invalid_argument("no training groups");
  }
  if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");

  TrainHistory history;
  SplitMix64 rng(cfg.seed);
  std::vector<std::size_t> perm(data.groups.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

  std::array<double, 3> weights =
      cfg.fixed_weights.value_or(std::array<double, 3>{1.0 / 3, 1.0 / 3, 1.0 / 3});
  bool weights_degenerate = false;
  int step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    deterministic_shuffle(perm, rng);
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, perm.size());
      const std::vector<std::size_t> batch_groups(perm.begin() + start,
                                                  perm.begin() + end);
      const auto batches = detail::make_batches(data, batch_groups);

      const LossGrad point = point_loss_grad(model, batches.points);
      const LossGrad pair = pair_loss_grad(model, batches.pairs);
      const LossGrad scl = scl_loss_grad(model, batches.scl, cfg.tau);

      if (!std::isfinite(point.loss) || !std::isfinite(pair.loss) ||
          !std::isfinite(scl.loss)) {
        throw TrainDivergence(step, "non-finite loss");
      }

      if (!cfg.fixed_weights && step % cfg.mgda_every == 0) {
        // Zero-gradient tasks are held out of the subproblem: MGDA would
        // otherwise park all weight on them and stall the update.
        std::vector<Vec> grads = {point.flattened(), pair.flattened(),
                                  scl.flattened()};
        std::vector<std::size_t> active;
        for (std::size_t tix = 0; tix < grads.size(); ++tix) {
          double nn = 0.0;
          for (double v : grads[tix]) nn += v * v;
          if (nn > 0.0) active.push_back(tix);
        }
        weights = {0.0, 0.0, 0.0};
        if (active.empty()) {
          weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
          weights_degenerate = true;
        } else {
          std::vector<Vec> active_grads;
          for (auto tix : active) active_grads.push_back(std::move(grads[tix]));
          const TaskWeights tw = mgda_weights(active_grads);
          weights_degenerate = tw.degenerate;
          for (std::size_t i = 0; i < active.size(); ++i) weights[active[i]] = tw.c[i];
        }
      }

      double grad_norm2 = 0.0;
      for (std::size_t i = 0; i < model.W.size(); ++i) {
        const double g = weights[0] * point.grad_W[i] + weights[1] * pair.grad_W[i] +
                         weights[2] * scl.grad_W[i];
        grad_norm2 += g * g;
        model.W[i] -= cfg.lr * g;
      }
      const double gb = weights[0] * point.grad_b + weights[1] * pair.grad_b +
                        weights[2] * scl.grad_b;
      grad_norm2 += gb * gb;
      model.b -= cfg.lr * gb;

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.loss_point = point.loss;
      rec.loss_pair = pair.loss;
      rec.loss_scl = scl.loss;
      rec.weights = weights;
      rec.grad_norm = std::sqrt(grad_norm2);
      rec.mgda_degenerate = weights_degenerate;
      history.push_back(rec);
      ++step;
    }
  }
  return history;
}

/// Scores every retrieved document with the trained model and returns the
/// top-k, ties resolved by the original retriever rank.
inline std::vector<ScoredDoc> rerank(const RerankerModel& model,
                                     const QueryRecord& query,
                                     const EmbeddingStore& store, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (k > query.retrieved.size()) {
    throw std::invalid_argument("k=" + std::to_string(k) +
                                " exceeds retrieval depth " +
                                std::to_string(query.retrieved.size()));
  }
  const Vec q = detail::widen(query.embedding);
  if (q.size() != model.dim) {
    throw std::invalid_argument("query dim != model dim");
  }

  std::vector<std::pair<double, std::size_t>> scored(query.retrieved.size());
  for (std::size_t i = 0; i < query.retrieved.size(); ++i) {
    const Vec d = detail::widen(store.row_of(query.retrieved[i].doc_id));
    scored[i] = {model.score(q, d), i};
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  std::vector<ScoredDoc> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({query.retrieved[scored[i].second].doc_id,
                   static_cast<float>(scored[i].first)});
  }
  return out;
}

inline nlohmann::ordered_json step_to_json(const StepRecord& rec) {
  nlohmann::ordered_json j;
  j["step"] = rec.step;
  j["epoch"] = rec.epoch;
  j["loss_point"] = rec.loss_point;
  j["loss_pair"] = rec.loss_pair;
  j["loss_scl"] = rec.loss_scl;
  j["weights"] = rec.weights;
  j["grad_norm"] = rec.grad_norm;
  j["mgda_degenerate"] = rec.mgda_degenerate;
  return j;
}

}  // namespace dpa

#endif  // DPA_TRAIN_HPP
