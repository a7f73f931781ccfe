// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_SYNTHETIC_HPP
#define DPA_SYNTHETIC_HPP

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "dpa/embedding_store.hpp"
#include "dpa/gateway.hpp"
#include "dpa/jsonl.hpp"
#include "dpa/rng.hpp"
#include "dpa/types.hpp"

namespace dpa {

// Planted-signal corpus for offline runs. Embeddings have three blocks:
//   [0, 16)   surface: each query group owns one basis direction and its
//             documents sit at fixed coefficient slots, so dot-product
//             retrieval ranks them exactly by slot;
//   [16, 24)  query-hidden: each query's private unit direction;
//   [24, 32)  doc-hidden: the answer-bearing document carries a copy of its
//             query's hidden direction, distractors carry random noise.
// Queries are zero on the doc-hidden block and documents are zero on the
// query-hidden block, so the retriever's dot product is exactly blind to
// the planted signal; a bilinear reranker can recover it through the
// cross-block of its weight matrix. The answer document's slot decides
// whether preference extraction sees it.

struct SyntheticConfig {
  std::uint64_t seed = 20240601;
  std::size_t groups = 10;
  std::size_t queries_per_group = 25;  // first 20 train, last 5 test
  std::size_t train_per_group = 20;
  std::size_t docs_per_group = 100;
  std::size_t dim = 32;
  std::size_t surface_dim = 16;
  double slot_base = 1.0;   // doc surface coefficient: base + step*(100-s)
  double slot_step = 0.02;
  double distractor_hidden_scale = 0.5;  // keeps planted margins >= 0.5
};

struct SyntheticData {
  std::vector<Document> docs;
  std::vector<QueryRecord> train_queries;
  std::vector<QueryRecord> test_queries;
};

namespace detail {

/// Retrieval slot (1-based) of the answer-bearing document for the w-th
/// query of a group. Train w 0..3 land on the extraction ranks; w 4..19
/// land off-rank so extraction drops them; test w 20..24 sit outside the
/// retriever's top-3 but inside the top-100.
inline std::size_t planted_slot(std::size_t w) {
  static const std::size_t retained[4] = {1, 25, 50, 100};
  if (w < 4) return retained[w];
  if (w < 19) return 10 + (w - 4);  // 10..24
  if (w == 19) return 26;
  return 5 + (w - 20);  // test: 5..9
}

inline std::vector<float> unit_vector(std::size_t n, SplitMix64& rng) {
  std::vector<double> v(n);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = rng.next_gaussian();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

inline std::string zero_pad(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

}  // namespace detail

inline SyntheticData make_synthetic(const SyntheticConfig& cfg = {}) {
  if (cfg.surface_dim >= cfg.dim || (cfg.dim - cfg.surface_dim) % 2 != 0) {
    throw std::invalid_argument("dim must leave an even hidden region after surface_dim");
  }
  if (cfg.groups > cfg.surface_dim) {
    throw std::invalid_argument("one surface dimension per group required");
  }
  const std::size_t hidden_dim = (cfg.dim - cfg.surface_dim) / 2;
  const std::size_t query_block = cfg.surface_dim;              // [16, 24)
  const std::size_t doc_block = cfg.surface_dim + hidden_dim;   // [24, 32)

  SyntheticData data;
  // Hidden direction per query, drawn independently of everything else.
  std::vector<std::vector<float>> query_hidden;
  const std::size_t n_queries = cfg.groups * cfg.queries_per_group;
  for (std::size_t qi = 0; qi < n_queries; ++qi) {
    SplitMix64 rng = record_rng(cfg.seed, "qh/" + std::to_string(qi));
    query_hidden.push_back(detail::unit_vector(hidden_dim, rng));
  }

  // Map (group, slot) -> planted query index, if any.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> planted_at;
  for (std::size_t g = 0; g < cfg.groups; ++g) {
    for (std::size_t w = 0; w < cfg.queries_per_group; ++w) {
      planted_at[{g, detail::planted_slot(w)}] = g * cfg.queries_per_group + w;
    }
  }

  for (std::size_t g = 0; g < cfg.groups; ++g) {
    for (std::size_t slot = 1; slot <= cfg.docs_per_group; ++slot) {
      const std::size_t doc_idx = g * cfg.docs_per_group + (slot - 1);
      Document doc;
      doc.doc_id = "d" + detail::zero_pad(doc_idx, 4);
      doc.title = "Section " + std::to_string(g) + " entry " + std::to_string(slot);

      doc.embedding.assign(cfg.dim, 0.0f);
      doc.embedding[g] = static_cast<float>(
          cfg.slot_base + cfg.slot_step * static_cast<double>(cfg.docs_per_group - slot));

      auto it = planted_at.find({g, slot});
      if (it != planted_at.end()) {
        const std::size_t qi = it->second;
        const std::string num = detail::zero_pad(qi, 3);
        doc.text = "Catalog entry " + std::to_string(slot) + " in section " +
                   std::to_string(g) + ". The code word for record " + num +
                   " is ans" + num + ".";
        for (std::size_t h = 0; h < hidden_dim; ++h) {
          doc.embedding[doc_block + h] = query_hidden[qi][h];
        }
      } else {
        doc.text = "Catalog entry " + std::to_string(slot) + " in section " +
                   std::to_string(g) + ". Routine filler text with nothing notable.";
        SplitMix64 rng = record_rng(cfg.seed, "dh/" + doc.doc_id);
        const auto hidden = detail::unit_vector(hidden_dim, rng);
        for (std::size_t h = 0; h < hidden_dim; ++h) {
          doc.embedding[doc_block + h] =
              static_cast<float>(cfg.distractor_hidden_scale * hidden[h]);
        }
      }
      data.docs.push_back(std::move(doc));
    }
  }

  for (std::size_t g = 0; g < cfg.groups; ++g) {
    for (std::size_t w = 0; w < cfg.queries_per_group; ++w) {
      const std::size_t qi = g * cfg.queries_per_group + w;
      const std::string num = detail::zero_pad(qi, 3);
      QueryRecord q;
      q.query_id = "q" + num;
      q.query = "what is the code word for record " + num;
      q.gold_answers = {"ans" + num};
      q.embedding.assign(cfg.dim, 0.0f);
      q.embedding[g] = 1.0f;
      for (std::size_t h = 0; h < hidden_dim; ++h) {
        q.embedding[query_block + h] = query_hidden[qi][h];
      }
      if (w < cfg.train_per_group) {
        data.train_queries.push_back(std::move(q));
      } else {
        data.test_queries.push_back(std::move(q));
      }
    }
  }
  return data;
}

/// Materializes docs.jsonl, queries_train.jsonl, queries_test.jsonl and the
/// binary store under `dir` (which must exist).
inline void write_synthetic(const SyntheticData& data, const std::string& dir) {
  write_jsonl(dir + "/docs.jsonl", data.docs);
  write_jsonl(dir + "/queries_train.jsonl", data.train_queries);
  write_jsonl(dir + "/queries_test.jsonl", data.test_queries);
  EmbeddingStore store(static_cast<std::uint32_t>(data.docs[0].embedding.size()));
  for (const auto& d : data.docs) store.add(d.doc_id, d.embedding);
  save_store(store, dir + "/corpus.dpae");
}

/// Deterministic reader for mock mode. Knows every fixture query's gold
/// answer; answers correctly (log-probability 0) exactly when some document
/// in the prompt carries that answer, otherwise replies "unknown" with
/// log-probability -10. Ratings, pairwise comparisons and the augmentation
/// prompts follow the same rule set.
class FixtureReader : public LlmClient {
 public:
  explicit FixtureReader(const std::vector<QueryRecord>& queries) {
    for (const auto& q : queries) gold_by_query_[q.query] = q.gold_answers.front();
  }

  FixtureReader(const std::vector<QueryRecord>& a, const std::vector<QueryRecord>& b) {
    for (const auto& q : a) gold_by_query_[q.query] = q.gold_answers.front();
    for (const auto& q : b) gold_by_query_[q.query] = q.gold_answers.front();
  }

  CompletionResult complete_once(const CompletionRequest& request) override {
    const std::string& p = request.prompt;

    if (p.rfind("You are an AI assistant helping me rewrite the query", 0) == 0) {
      return rewrite_reply(p);
    }
    if (p.rfind("Rate how helpful", 0) == 0) {
      const std::string query = between(p, "Query: ", "\n");
      const std::string docs = after(p, "\ndocument-1: ");
      return {contains_gold(docs, query) ? "5" : "1", std::nullopt};
    }
    if (p.rfind("Given a query and two documents", 0) == 0) {
      const std::string query = between(p, "Query: ", "\n");
      const std::string a = between(p, "\nA: ", "\nB: ");
      const std::string b = between(p, "\nB: ", "\nAnswer:");
      if (contains_gold(a, query)) return {"A", std::nullopt};
      if (contains_gold(b, query)) return {"B", std::nullopt};
      return {"A", std::nullopt};
    }
    if (p.rfind("Given the documents ", 0) == 0) {
      const std::string docs = between(p, "Given the documents ",
                                       ". Answer the following question");
      const std::string query = final_query(p);
      const std::string& gold = gold_for(query);
      if (docs.find(gold) != std::string::npos) return {gold, 0.0};
      return {"unknown", -10.0};
    }
    if (p.rfind("Answer the following question", 0) == 0) {
      gold_for(final_query(p));  // unknown queries still fail loudly
      return {"unknown", -10.0};
    }
    throw GatewayError(GatewayError::Kind::UnmappedPrompt,
                       "fixture reader cannot handle prompt: " + p.substr(0, 60));
  }

 private:
  CompletionResult rewrite_reply(const std::string& p) const {
    const std::string query = between(p, "Original Query: ", "\nReference Documents:");
    const std::string req = between(p, "Augmentation Requirements: ", "\nNew Queries:");
    if (req == augmentation_requirement(AugStrategy::SPARQL)) {
      return {"SELECT ?answer WHERE { " + query + " }", std::nullopt};
    }
    if (req == augmentation_requirement(AugStrategy::Rephrasing)) {
      return {"rephrased: " + query, std::nullopt};
    }
    if (req == augmentation_requirement(AugStrategy::Complexity)) {
      return {"in elaborate terms " + query, std::nullopt};
    }
    if (req == augmentation_requirement(AugStrategy::Decomposition)) {
      return {"first find the record then " + query, std::nullopt};
    }
    if (req == augmentation_requirement(AugStrategy::Constraint)) {
      return {query + " limited to archive scope", std::nullopt};
    }
    throw GatewayError(GatewayError::Kind::UnmappedPrompt,
                       "unknown augmentation requirement: " + req);
  }

  static std::string between(const std::string& s, const std::string& from,
                             const std::string& to) {
    const auto start = s.find(from);
    if (start == std::string::npos) {
      throw GatewayError(GatewayError::Kind::UnmappedPrompt, "marker missing: " + from);
    }
    const auto begin = start + from.size();
    const auto end = s.find(to, begin);
    if (end == std::string::npos) {
      throw GatewayError(GatewayError::Kind::UnmappedPrompt, "marker missing: " + to);
    }
    return s.substr(begin, end - begin);
  }

  static std::string after(const std::string& s, const std::string& from) {
    const auto start = s.find(from);
    if (start == std::string::npos) {
      throw GatewayError(GatewayError::Kind::UnmappedPrompt, "marker missing: " + from);
    }
    return s.substr(start + from.size());
  }

  /// The trailing "Query: X." of reader prompts.
  static std::string final_query(const std::string& p) {
    const auto pos = p.rfind("Query: ");
    if (pos == std::string::npos || p.empty() || p.back() != '.') {
      throw GatewayError(GatewayError::Kind::UnmappedPrompt, "no trailing query");
    }
    return p.substr(pos + 7, p.size() - pos - 8);
  }

  const std::string& gold_for(const std::string& query) const {
    // Augmented rewrites embed the original query text; fall back to scan.
    auto it = gold_by_query_.find(query);
    if (it != gold_by_query_.end()) return it->second;
    for (const auto& [text, gold] : gold_by_query_) {
      if (query.find(text) != std::string::npos) return gold;
    }
    throw GatewayError(GatewayError::Kind::UnmappedPrompt,
                       "fixture reader does not know query: " + query);
  }

  bool contains_gold(const std::string& text, const std::string& query) const {
    return text.find(gold_for(query)) != std::string::npos;
  }

  std::map<std::string, std::string> gold_by_query_;
};

}  // namespace dpa

#endif  // DPA_SYNTHETIC_HPP
