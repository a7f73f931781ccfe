// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_METRICS_HPP
#define DPA_METRICS_HPP

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dpa/pref_data.hpp"
#include "dpa/text_norm.hpp"
#include "dpa/types.hpp"

namespace dpa {

/// 1 iff the prediction contains any gold answer (shared normalization with
/// the extraction judge).
inline int hit_at_1(const std::string& prediction,
                    const std::vector<std::string>& gold_answers) {
  return judge_answer(prediction, gold_answers) ? 1 : 0;
}

/// Multiset token-overlap F1 after normalization, maximized over the golds.
/// Both sides empty scores 1, exactly one side empty scores 0.
inline double token_f1(const std::string& prediction,
                       const std::vector<std::string>& gold_answers) {
  const auto pred = normalize_tokens(prediction);
  double best = 0.0;
  for (const auto& gold_raw : gold_answers) {
    const auto gold = normalize_tokens(gold_raw);
    if (pred.empty() && gold.empty()) {
      best = std::max(best, 1.0);
      continue;
    }
    if (pred.empty() || gold.empty()) continue;

    std::map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++overlap;
      }
    }
    if (overlap == 0) continue;
    const double precision = static_cast<double>(overlap) / pred.size();
    const double recall = static_cast<double>(overlap) / gold.size();
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

struct CategoryReport {
  // counts/percentages indexed by PreferenceLabel enum order
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> percentages{};
  std::size_t total = 0;
};

/// Four-way outcome table over (direct_correct, rag_correct) pairs.
inline CategoryReport category_report(
    const std::vector<std::pair<bool, bool>>& outcomes) {
  if (outcomes.empty()) {
    throw std::invalid_argument("category report needs at least one outcome");
  }
  CategoryReport report;
  report.total = outcomes.size();
  for (const auto& [direct, rag] : outcomes) {
    ++report.counts[static_cast<int>(categorize(direct, rag))];
  }
  for (int i = 0; i < 4; ++i) {
    report.percentages[i] =
        100.0 * static_cast<double>(report.counts[i]) / static_cast<double>(report.total);
  }
  return report;
}

struct TagMetrics {
  double complexity = 0.0;  // total tags / samples
  double diversity = 0.0;   // unique tags / samples
};

inline TagMetrics tag_metrics(const std::vector<std::vector<std::string>>& samples) {
  if (samples.empty()) throw std::invalid_argument("tag metrics need >= 1 sample");
  std::size_t total = 0;
  std::set<std::string> unique;
  for (const auto& tags : samples) {
    total += tags.size();
    unique.insert(tags.begin(), tags.end());
  }
  const double n = static_cast<double>(samples.size());
  return {static_cast<double>(total) / n, static_cast<double>(unique.size()) / n};
}

}  // namespace dpa

#endif  // DPA_METRICS_HPP
