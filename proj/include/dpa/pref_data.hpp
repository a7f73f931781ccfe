// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_PREF_DATA_HPP
#define DPA_PREF_DATA_HPP

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "dpa/concurrency.hpp"
#include "dpa/gateway.hpp"
#include "dpa/prompts.hpp"
#include "dpa/retrieval.hpp"
#include "dpa/text_norm.hpp"
#include "dpa/types.hpp"

namespace dpa {

/// The four-way outcome table over (answered directly, answered with doc).
inline PreferenceLabel categorize(bool direct_correct, bool with_doc_correct) {
  if (direct_correct) {
    return with_doc_correct ? PreferenceLabel::BothCorrect
                            : PreferenceLabel::UnalignedKnowledge;
  }
  return with_doc_correct ? PreferenceLabel::AlignedKnowledge
                          : PreferenceLabel::BothIncorrect;
}

/// Cover-EM correctness: true iff some normalized gold answer appears as a
/// contiguous token run inside the normalized reply. Token-level matching
/// keeps hits consistent with token F1 (a hit always shares a token).
inline bool judge_answer(const std::string& reader_reply,
                         const std::vector<std::string>& gold_answers) {
  if (gold_answers.empty()) {
    throw std::invalid_argument("gold_answers must be non-empty");
  }
  const auto reply = normalize_tokens(reader_reply);
  for (const auto& gold : gold_answers) {
    const auto g = normalize_tokens(gold);
    if (g.empty() || g.size() > reply.size()) continue;
    for (std::size_t start = 0; start + g.size() <= reply.size(); ++start) {
      if (std::equal(g.begin(), g.end(), reply.begin() + start)) {
        return true;
      }
    }
  }
  return false;
}

/// Per-(query, rank) outcome row, consumed by the report stage.
struct ExtractionOutcome {
  std::string query_id;
  int rank = 0;
  bool direct_correct = false;
  bool doc_correct = false;
};

struct QueryFailure {
  std::string query_id;
  std::string error;
};

struct ExtractResult {
  std::vector<PreferenceSample> samples;  // retained members of D_pref
  std::vector<ExtractionOutcome> outcomes;  // all judged (query, rank) pairs
  std::vector<QueryFailure> failures;
  std::size_t queries_seen = 0;

  double retention_ratio() const {
    const std::size_t ok = queries_seen - failures.size();
    return ok == 0 ? 0.0 : static_cast<double>(samples.size()) / static_cast<double>(ok);
  }
};

struct ExtractOptions {
  std::size_t workers = 1;
};

/// Mines preference knowledge: asks the reader each query directly and once
/// per subset document (ranks 1/25/50/100), labels the outcomes, and keeps
/// samples with at least one Aligned/Unaligned document. Failures are
/// collected per query; the stage always finishes with a manifest.
inline ExtractResult extract_preferences(const std::vector<QueryRecord>& queries,
                                         const std::map<std::string, Document>& corpus,
                                         Gateway& reader,
                                         const ExtractOptions& options = {}) {
  struct PerQuery {
    std::optional<PreferenceSample> sample;
    std::vector<ExtractionOutcome> outcomes;
    std::optional<QueryFailure> failure;
    bool retained = false;
  };

  auto process = [&](std::size_t qi) -> PerQuery {
    const QueryRecord& q = queries[qi];
    PerQuery out;
    try {
      const auto subset = hierarchical_subset(q.retrieved);

      CompletionRequest direct;
      direct.prompt = direct_prompt(q.query);
      const bool direct_correct = judge_answer(reader.complete(direct), q.gold_answers);

      PreferenceSample sample;
      sample.query_id = q.query_id;
      sample.direct_correct = direct_correct;
      for (const auto& [rank, doc_id] : subset) {
        auto it = corpus.find(doc_id);
        if (it == corpus.end()) {
          throw std::runtime_error("retrieved doc missing from corpus: " + doc_id);
        }
        CompletionRequest with_doc;
        with_doc.prompt = sft_prompt(q.query, {{it->second.title, it->second.text}});
        const bool doc_correct = judge_answer(reader.complete(with_doc), q.gold_answers);

        sample.subset.push_back({rank, doc_id, categorize(direct_correct, doc_correct)});
        out.outcomes.push_back({q.query_id, rank, direct_correct, doc_correct});
      }
      out.retained = sample.has_preference_signal();
      out.sample = std::move(sample);
    } catch (const std::exception& e) {
      out.failure = QueryFailure{q.query_id, e.what()};
    }
    return out;
  };

  auto per_query = parallel_map<PerQuery>(queries.size(), options.workers, process);

  ExtractResult result;
  result.queries_seen = queries.size();
  for (auto& pq : per_query) {
    if (pq.failure) {
      result.failures.push_back(std::move(*pq.failure));
      continue;
    }
    result.outcomes.insert(result.outcomes.end(), pq.outcomes.begin(), pq.outcomes.end());
    if (pq.retained) result.samples.push_back(std::move(*pq.sample));
  }
  auto by_query = [](const auto& a, const auto& b) { return a.query_id < b.query_id; };
  std::sort(result.samples.begin(), result.samples.end(), by_query);
  std::sort(result.failures.begin(), result.failures.end(), by_query);
  std::sort(result.outcomes.begin(), result.outcomes.end(),
            [](const auto& a, const auto& b) {
              return a.query_id != b.query_id ? a.query_id < b.query_id : a.rank < b.rank;
            });
  return result;
}

/// One augmentation call; the reply becomes the rewritten query, NLI verdict
/// still pending.
inline AugmentedQuery augment_query(const QueryRecord& query, const std::string& title,
                                    const std::vector<PromptDoc>& top_docs,
                                    AugStrategy strategy, Gateway& client) {
  CompletionRequest req;
  req.prompt = augmentation_prompt(query.query, top_docs, title, strategy);
  req.temperature = 1.0;
  AugmentedQuery aug;
  aug.origin_query_id = query.query_id;
  aug.strategy = strategy;
  aug.text = client.complete(req);
  return aug;
}

struct FilterResult {
  std::vector<AugmentedQuery> retained;
  std::vector<QueryFailure> failures;
  std::size_t dropped = 0;

  double drop_rate() const {
    const std::size_t judged = retained.size() + dropped;
    return judged == 0 ? 0.0 : static_cast<double>(dropped) / static_cast<double>(judged);
  }
};

/// NLI quality gate: premise is the original query, hypothesis the rewrite.
/// Contradictions are dropped; entailment and neutral records are retained
/// with their verdicts recorded.
inline FilterResult filter_augmented(const std::vector<AugmentedQuery>& augmented,
                                     const std::map<std::string, QueryRecord>& originals,
                                     NliScorer& scorer) {
  FilterResult result;
  for (const auto& aug : augmented) {
    auto it = originals.find(aug.origin_query_id);
    if (it == originals.end()) {
      result.failures.push_back({aug.origin_query_id, "origin query not found"});
      continue;
    }
    try {
      const auto verdict = nli_judge(scorer, it->second.query, aug.text);
      if (verdict.label == NliLabel::Contradiction) {
        ++result.dropped;
        continue;
      }
      AugmentedQuery kept = aug;
      kept.nli_verdict = verdict.label;
      result.retained.push_back(std::move(kept));
    } catch (const std::exception& e) {
      result.failures.push_back({aug.origin_query_id, e.what()});
    }
  }
  return result;
}

/// Concatenates the original preference set with per-strategy augmented
/// sets. Augmented entries clone the origin's document subset and carry
/// provenance; nothing is deduplicated.
inline std::vector<PreferenceSample> merge_pref(
    const std::vector<PreferenceSample>& original,
    const std::vector<AugmentedQuery>& augmented) {
  std::map<std::string, const PreferenceSample*> by_id;
  for (const auto& s : original) by_id[s.query_id] = &s;

  std::vector<PreferenceSample> merged = original;
  std::map<std::string, int> strategy_counts;
  for (const auto& aug : augmented) {
    if (aug.nli_verdict && *aug.nli_verdict == NliLabel::Contradiction) {
      throw std::invalid_argument("contradiction record may not enter a training set: " +
                                  aug.origin_query_id);
    }
    auto it = by_id.find(aug.origin_query_id);
    if (it == by_id.end()) {
      throw std::invalid_argument("augmented query has no origin sample: " +
                                  aug.origin_query_id);
    }
    PreferenceSample s = *it->second;
    const int n = ++strategy_counts[aug.origin_query_id + "#" + to_string(aug.strategy)];
    s.query_id = aug.origin_query_id + "#" + to_string(aug.strategy) +
                 (n > 1 ? "#" + std::to_string(n) : "");
    s.origin_query_id = aug.origin_query_id;
    s.strategy = aug.strategy;
    s.aug_text = aug.text;
    merged.push_back(std::move(s));
  }
  return merged;
}

}  // namespace dpa

#endif  // DPA_PREF_DATA_HPP
