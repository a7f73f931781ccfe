// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_RETRIEVAL_HPP
#define DPA_RETRIEVAL_HPP

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpa/embedding_store.hpp"
#include "dpa/types.hpp"

namespace dpa {

struct RetrievalResult {
  std::string query_id;
  std::vector<ScoredDoc> hits;  // non-increasing by score
};

/// Exhaustive dot-product retrieval. Scores accumulate in 64-bit and are
/// stored as float32; ties break by ascending row index so results are
/// reproducible across platforms.
inline RetrievalResult dense_retrieve(std::span<const float> query_embedding,
                                      const EmbeddingStore& store,
                                      std::size_t k,
                                      std::string query_id = {}) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (query_embedding.size() != store.dim()) {
    throw std::invalid_argument("query dim " + std::to_string(query_embedding.size()) +
                                " != store dim " + std::to_string(store.dim()));
  }
  if (k > store.count()) {
    throw std::invalid_argument("k=" + std::to_string(k) + " exceeds store count " +
                                std::to_string(store.count()));
  }

  std::vector<std::pair<float, std::size_t>> scored(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    const auto row = store.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      acc += static_cast<double>(query_embedding[j]) * static_cast<double>(row[j]);
    }
    scored[i] = {static_cast<float>(acc), i};
  }

  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), better);

  RetrievalResult result;
  result.query_id = std::move(query_id);
  result.hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    result.hits.push_back({store.ids()[scored[i].second], scored[i].first});
  }
  return result;
}

/// 1-based ranks sampled from a retrieval list to build the document subset.
inline constexpr int kSubsetRanks[4] = {1, 25, 50, 100};

/// Picks the fixed ranks {1, 25, 50, 100} out of a >=100-deep hit list.
inline std::vector<std::pair<int, std::string>> hierarchical_subset(
    const std::vector<ScoredDoc>& hits) {
  if (hits.size() < 100) {
    throw std::invalid_argument("hierarchical subset needs 100 hits, got " +
                                std::to_string(hits.size()) + " (short by " +
                                std::to_string(100 - hits.size()) + ")");
  }
  std::vector<std::pair<int, std::string>> subset;
  subset.reserve(4);
  for (int rank : kSubsetRanks) {
    subset.emplace_back(rank, hits[static_cast<std::size_t>(rank) - 1].doc_id);
  }
  return subset;
}

inline std::vector<std::pair<int, std::string>> hierarchical_subset(
    const RetrievalResult& result) {
  return hierarchical_subset(result.hits);
}

}  // namespace dpa

#endif  // DPA_RETRIEVAL_HPP
