// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_TYPES_HPP
#define DPA_TYPES_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace dpa {

/// Outcome category for a (direct answer, answer with document) pair.
enum class PreferenceLabel {
  BothCorrect,
  AlignedKnowledge,
  UnalignedKnowledge,
  BothIncorrect,
};

inline const char* to_string(PreferenceLabel label) {
  switch (label) {
    case PreferenceLabel::BothCorrect: return "BothCorrect";
    case PreferenceLabel::AlignedKnowledge: return "AlignedKnowledge";
    case PreferenceLabel::UnalignedKnowledge: return "UnalignedKnowledge";
    case PreferenceLabel::BothIncorrect: return "BothIncorrect";
  }
  throw std::logic_error("bad PreferenceLabel");
}

inline PreferenceLabel preference_label_from(const std::string& s) {
  if (s == "BothCorrect") return PreferenceLabel::BothCorrect;
  if (s == "AlignedKnowledge") return PreferenceLabel::AlignedKnowledge;
  if (s == "UnalignedKnowledge") return PreferenceLabel::UnalignedKnowledge;
  if (s == "BothIncorrect") return PreferenceLabel::BothIncorrect;
  throw std::invalid_argument("unknown preference label: " + s);
}

enum class AugStrategy {
  Rephrasing,
  Complexity,
  Decomposition,
  Constraint,
  SPARQL,
};

inline const char* to_string(AugStrategy s) {
  switch (s) {
    case AugStrategy::Rephrasing: return "Rephrasing";
    case AugStrategy::Complexity: return "Complexity";
    case AugStrategy::Decomposition: return "Decomposition";
    case AugStrategy::Constraint: return "Constraint";
    case AugStrategy::SPARQL: return "SPARQL";
  }
  throw std::logic_error("bad AugStrategy");
}

inline AugStrategy aug_strategy_from(const std::string& s) {
  if (s == "Rephrasing") return AugStrategy::Rephrasing;
  if (s == "Complexity") return AugStrategy::Complexity;
  if (s == "Decomposition") return AugStrategy::Decomposition;
  if (s == "Constraint") return AugStrategy::Constraint;
  if (s == "SPARQL") return AugStrategy::SPARQL;
  throw std::invalid_argument("unknown augmentation strategy: " + s);
}

inline const std::vector<AugStrategy>& all_strategies() {
  static const std::vector<AugStrategy> all = {
      AugStrategy::Rephrasing, AugStrategy::Complexity,
      AugStrategy::Decomposition, AugStrategy::Constraint,
      AugStrategy::SPARQL};
  return all;
}

enum class NliLabel { Entailment, Neutral, Contradiction };

inline const char* to_string(NliLabel label) {
  switch (label) {
    case NliLabel::Entailment: return "entailment";
    case NliLabel::Neutral: return "neutral";
    case NliLabel::Contradiction: return "contradiction";
  }
  throw std::logic_error("bad NliLabel");
}

inline NliLabel nli_label_from(const std::string& s) {
  if (s == "entailment") return NliLabel::Entailment;
  if (s == "neutral") return NliLabel::Neutral;
  if (s == "contradiction") return NliLabel::Contradiction;
  throw std::invalid_argument("unknown NLI label: " + s);
}

/// A corpus passage. Embedding length must match the store dimension.
struct Document {
  std::string doc_id;
  std::string title;
  std::string text;
  std::vector<float> embedding;
  nlohmann::ordered_json extras;  // unknown fields kept in lenient mode
};

struct ScoredDoc {
  std::string doc_id;
  float score = 0.0f;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// A question with gold answers and its ranked retrieval list
/// (sorted non-increasing by score, ties in insertion order).
struct QueryRecord {
  std::string query_id;
  std::string query;
  std::vector<std::string> gold_answers;
  std::vector<float> embedding;
  std::vector<ScoredDoc> retrieved;
  nlohmann::ordered_json extras;
};

struct SubsetEntry {
  int rank = 0;  // 1-based retrieval rank, one of {1, 25, 50, 100}
  std::string doc_id;
  PreferenceLabel label = PreferenceLabel::BothIncorrect;
};

/// One unit of the preference dataset: a query plus its hierarchically
/// sampled document subset with four-way labels. Samples derived from an
/// augmented query carry provenance fields pointing at the origin.
struct PreferenceSample {
  std::string query_id;
  bool direct_correct = false;
  std::vector<SubsetEntry> subset;
  std::optional<std::string> origin_query_id;
  std::optional<AugStrategy> strategy;
  std::optional<std::string> aug_text;
  nlohmann::ordered_json extras;

  bool has_preference_signal() const {
    for (const auto& e : subset) {
      if (e.label == PreferenceLabel::AlignedKnowledge ||
          e.label == PreferenceLabel::UnalignedKnowledge) {
        return true;
      }
    }
    return false;
  }
};

struct AugmentedQuery {
  std::string origin_query_id;
  AugStrategy strategy = AugStrategy::Rephrasing;
  std::string text;
  std::optional<NliLabel> nli_verdict;  // nullopt serializes as "pending"
  nlohmann::ordered_json extras;
};

/// An emitted training example for the LLM alignment stages.
struct AlignmentRecord {
  std::string query_id;
  std::string stage;  // "prealigned" | "sft"
  std::string prompt;
  std::string target;
  std::optional<int> pref_doc_position;  // 1-based, prealigned only
  std::uint64_t seed_used = 0;
  nlohmann::ordered_json extras;
};

}  // namespace dpa

#endif  // DPA_TYPES_HPP
