// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_SELF_ALIGN_HPP
#define DPA_SELF_ALIGN_HPP

#include <map>
#include <string>
#include <vector>

#include "dpa/prompts.hpp"
#include "dpa/rng.hpp"
#include "dpa/types.hpp"

namespace dpa {

/// Document list with a stable iteration order for seeded sampling.
struct OrderedCorpus {
  std::vector<Document> docs;          // sorted by doc_id
  std::map<std::string, std::size_t> index;

  explicit OrderedCorpus(std::vector<Document> in) : docs(std::move(in)) {
    std::sort(docs.begin(), docs.end(),
              [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!index.emplace(docs[i].doc_id, i).second) {
        throw std::invalid_argument("duplicate doc_id: " + docs[i].doc_id);
      }
    }
  }

  const Document& at(const std::string& id) const {
    auto it = index.find(id);
    if (it == index.end()) throw std::out_of_range("unknown doc_id: " + id);
    return docs[it->second];
  }
};

/// Builds one pre-aligned-stage record: one preference document planted at a
/// seeded-uniform position among k-1 random corpus documents. The judgement
/// word is Positive for aligned knowledge, Negative for unaligned. The draw
/// is keyed on (seed, query_id), so emission order cannot change it.
inline AlignmentRecord emit_prealigned(const PreferenceSample& sample,
                                       const OrderedCorpus& corpus,
                                       const std::string& query_text,
                                       const std::string& gold_answer, int k,
                                       std::uint64_t global_seed) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");

  std::vector<const SubsetEntry*> eligible;
  for (const auto& e : sample.subset) {
    if (e.label == PreferenceLabel::AlignedKnowledge ||
        e.label == PreferenceLabel::UnalignedKnowledge) {
      eligible.push_back(&e);
    }
  }
  if (eligible.empty()) {
    throw std::invalid_argument("sample " + sample.query_id +
                                " has no aligned/unaligned document");
  }
  if (corpus.docs.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("corpus too small: need " + std::to_string(k) +
                                " documents, have " +
                                std::to_string(corpus.docs.size()));
  }

  SplitMix64 rng = record_rng(global_seed, sample.query_id);
  const SubsetEntry& pick = *eligible[rng.next_below(eligible.size())];
  const Document& pref_doc = corpus.at(pick.doc_id);
  const std::size_t pref_row = corpus.index.at(pick.doc_id);

  // k-1 distinct random documents other than the preference document.
  std::vector<std::size_t> others;
  while (others.size() + 1 < static_cast<std::size_t>(k)) {
    const std::size_t cand = rng.next_below(corpus.docs.size());
    if (cand == pref_row) continue;
    bool dup = false;
    for (const auto o : others) {
      if (o == cand) { dup = true; break; }
    }
    if (!dup) others.push_back(cand);
  }

  const int position = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));

  std::vector<PromptDoc> docs;
  std::size_t next_other = 0;
  for (int slot = 1; slot <= k; ++slot) {
    if (slot == position) {
      docs.push_back({pref_doc.title, pref_doc.text});
    } else {
      const Document& d = corpus.docs[others[next_other++]];
      docs.push_back({d.title, d.text});
    }
  }

  const bool positive = pick.label == PreferenceLabel::AlignedKnowledge;
  AlignmentRecord rec;
  rec.query_id = sample.query_id;
  rec.stage = "prealigned";
  rec.prompt = prealigned_prompt(query_text, docs, position);
  rec.target = prealigned_target(gold_answer, position, positive);
  rec.pref_doc_position = position;
  rec.seed_used = global_seed;
  return rec;
}

/// Builds one SFT record from the reranked top-k list, documents rendered in
/// the given order, target = the first gold answer.
inline AlignmentRecord emit_sft(const QueryRecord& query,
                                const std::vector<std::string>& reranked_topk,
                                const OrderedCorpus& corpus,
                                std::uint64_t global_seed) {
  if (reranked_topk.empty()) throw std::invalid_argument("top-k list is empty");
  std::vector<PromptDoc> docs;
  for (const auto& id : reranked_topk) {
    const Document& d = corpus.at(id);  // throws on missing doc
    docs.push_back({d.title, d.text});
  }
  AlignmentRecord rec;
  rec.query_id = query.query_id;
  rec.stage = "sft";
  rec.prompt = sft_prompt(query.query, docs);
  rec.target = query.gold_answers.front();
  rec.seed_used = global_seed;
  return rec;
}

}  // namespace dpa

#endif  // DPA_SELF_ALIGN_HPP
