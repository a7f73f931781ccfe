// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_JSONL_HPP
#define DPA_JSONL_HPP

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dpa/errors.hpp"
#include "dpa/types.hpp"

namespace dpa {

using ordered_json = nlohmann::ordered_json;

enum class ParseMode {
  Strict,   // unknown fields are an error
  Lenient,  // unknown fields are preserved and re-emitted on write
};

namespace detail {

/// Pulls known fields out of a parsed object and tracks what is left over.
class FieldReader {
 public:
  FieldReader(const ordered_json& obj) : obj_(obj) {
    if (!obj.is_object()) throw std::invalid_argument("record is not a JSON object");
  }

  const ordered_json& require(const char* name) {
    auto it = obj_.find(name);
    if (it == obj_.end()) {
      throw std::invalid_argument(std::string("missing field '") + name + "'");
    }
    seen_.insert(name);
    return *it;
  }

  const ordered_json* optional(const char* name) {
    auto it = obj_.find(name);
    if (it == obj_.end()) return nullptr;
    seen_.insert(name);
    return &*it;
  }

  /// Strict: any unconsumed key is an error. Lenient: keep them in `extras`.
  void finish(ParseMode mode, ordered_json& extras) {
    extras = ordered_json::object();
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (seen_.count(it.key())) continue;
      if (mode == ParseMode::Strict) {
        throw std::invalid_argument("unknown field '" + it.key() + "'");
      }
      extras[it.key()] = it.value();
    }
  }

 private:
  const ordered_json& obj_;
  std::set<std::string> seen_;
};

inline void append_extras(ordered_json& out, const ordered_json& extras) {
  if (!extras.is_object()) return;
  for (auto it = extras.begin(); it != extras.end(); ++it) {
    out[it.key()] = it.value();
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-type record serialization. Field names and their order are part of the
// on-disk contract; writes are byte-deterministic.
// ---------------------------------------------------------------------------

inline void record_to_json(ordered_json& j, const Document& d) {
  j = ordered_json::object();
  j["doc_id"] = d.doc_id;
  j["title"] = d.title;
  j["text"] = d.text;
  j["embedding"] = d.embedding;
  detail::append_extras(j, d.extras);
}

inline void record_from_json(const ordered_json& j, Document& d, ParseMode mode) {
  detail::FieldReader r(j);
  d.doc_id = r.require("doc_id").get<std::string>();
  d.title = r.require("title").get<std::string>();
  d.text = r.require("text").get<std::string>();
  d.embedding = r.require("embedding").get<std::vector<float>>();
  r.finish(mode, d.extras);
  if (d.doc_id.empty()) throw std::invalid_argument("empty doc_id");
}

inline void record_to_json(ordered_json& j, const QueryRecord& q) {
  j = ordered_json::object();
  j["query_id"] = q.query_id;
  j["query"] = q.query;
  j["gold_answers"] = q.gold_answers;
  j["embedding"] = q.embedding;
  auto hits = ordered_json::array();
  for (const auto& h : q.retrieved) {
    hits.push_back(ordered_json::array({h.doc_id, h.score}));
  }
  j["retrieved"] = std::move(hits);
  detail::append_extras(j, q.extras);
}

inline void record_from_json(const ordered_json& j, QueryRecord& q, ParseMode mode) {
  detail::FieldReader r(j);
  q.query_id = r.require("query_id").get<std::string>();
  q.query = r.require("query").get<std::string>();
  q.gold_answers = r.require("gold_answers").get<std::vector<std::string>>();
  q.embedding = r.require("embedding").get<std::vector<float>>();
  q.retrieved.clear();
  for (const auto& h : r.require("retrieved")) {
    if (!h.is_array() || h.size() != 2) {
      throw std::invalid_argument("retrieved entry must be [doc_id, score]");
    }
    q.retrieved.push_back({h[0].get<std::string>(), h[1].get<float>()});
  }
  r.finish(mode, q.extras);
  if (q.gold_answers.empty()) throw std::invalid_argument("gold_answers must be non-empty");
  for (std::size_t i = 1; i < q.retrieved.size(); ++i) {
    if (q.retrieved[i].score > q.retrieved[i - 1].score) {
      throw std::invalid_argument("retrieved scores must be non-increasing");
    }
  }
}

inline void record_to_json(ordered_json& j, const PreferenceSample& s) {
  j = ordered_json::object();
  j["query_id"] = s.query_id;
  j["direct_correct"] = s.direct_correct;
  auto subset = ordered_json::array();
  for (const auto& e : s.subset) {
    auto o = ordered_json::object();
    o["rank"] = e.rank;
    o["doc_id"] = e.doc_id;
    o["label"] = to_string(e.label);
    subset.push_back(std::move(o));
  }
  j["subset"] = std::move(subset);
  if (s.origin_query_id) j["origin_query_id"] = *s.origin_query_id;
  if (s.strategy) j["strategy"] = to_string(*s.strategy);
  if (s.aug_text) j["aug_text"] = *s.aug_text;
  detail::append_extras(j, s.extras);
}

inline void record_from_json(const ordered_json& j, PreferenceSample& s, ParseMode mode) {
  detail::FieldReader r(j);
  s.query_id = r.require("query_id").get<std::string>();
  s.direct_correct = r.require("direct_correct").get<bool>();
  s.subset.clear();
  for (const auto& e : r.require("subset")) {
    SubsetEntry entry;
    entry.rank = e.at("rank").get<int>();
    entry.doc_id = e.at("doc_id").get<std::string>();
    entry.label = preference_label_from(e.at("label").get<std::string>());
    s.subset.push_back(std::move(entry));
  }
  if (const auto* v = r.optional("origin_query_id")) s.origin_query_id = v->get<std::string>();
  if (const auto* v = r.optional("strategy")) s.strategy = aug_strategy_from(v->get<std::string>());
  if (const auto* v = r.optional("aug_text")) s.aug_text = v->get<std::string>();
  r.finish(mode, s.extras);

  static const int kRanks[4] = {1, 25, 50, 100};
  if (s.subset.size() != 4) {
    throw std::invalid_argument("subset must have exactly 4 entries");
  }
  for (int i = 0; i < 4; ++i) {
    if (s.subset[i].rank != kRanks[i]) {
      throw std::invalid_argument("subset ranks must be {1, 25, 50, 100} ascending");
    }
  }
}

inline void record_to_json(ordered_json& j, const AugmentedQuery& a) {
  j = ordered_json::object();
  j["origin_query_id"] = a.origin_query_id;
  j["strategy"] = to_string(a.strategy);
  j["text"] = a.text;
  j["nli_verdict"] = a.nli_verdict ? to_string(*a.nli_verdict) : "pending";
  detail::append_extras(j, a.extras);
}

inline void record_from_json(const ordered_json& j, AugmentedQuery& a, ParseMode mode) {
  detail::FieldReader r(j);
  a.origin_query_id = r.require("origin_query_id").get<std::string>();
  a.strategy = aug_strategy_from(r.require("strategy").get<std::string>());
  a.text = r.require("text").get<std::string>();
  const auto verdict = r.require("nli_verdict").get<std::string>();
  a.nli_verdict = verdict == "pending" ? std::nullopt
                                       : std::optional<NliLabel>(nli_label_from(verdict));
  r.finish(mode, a.extras);
}

inline void record_to_json(ordered_json& j, const AlignmentRecord& rec) {
  j = ordered_json::object();
  j["query_id"] = rec.query_id;
  j["stage"] = rec.stage;
  j["prompt"] = rec.prompt;
  j["target"] = rec.target;
  if (rec.pref_doc_position) j["pref_doc_position"] = *rec.pref_doc_position;
  j["seed_used"] = rec.seed_used;
  detail::append_extras(j, rec.extras);
}

inline void record_from_json(const ordered_json& j, AlignmentRecord& rec, ParseMode mode) {
  detail::FieldReader r(j);
  rec.query_id = r.require("query_id").get<std::string>();
  rec.stage = r.require("stage").get<std::string>();
  rec.prompt = r.require("prompt").get<std::string>();
  rec.target = r.require("target").get<std::string>();
  if (const auto* v = r.optional("pref_doc_position")) rec.pref_doc_position = v->get<int>();
  rec.seed_used = r.require("seed_used").get<std::uint64_t>();
  r.finish(mode, rec.extras);
  if (rec.stage != "prealigned" && rec.stage != "sft") {
    throw std::invalid_argument("stage must be 'prealigned' or 'sft'");
  }
  if (rec.stage == "prealigned" && !rec.pref_doc_position) {
    throw std::invalid_argument("prealigned record needs pref_doc_position");
  }
  if (rec.stage == "sft" && rec.pref_doc_position) {
    throw std::invalid_argument("sft record must not carry pref_doc_position");
  }
}

// ---------------------------------------------------------------------------
// Line-oriented IO
// ---------------------------------------------------------------------------

template <typename T>
std::string to_jsonl_line(const T& record) {
  ordered_json j;
  record_to_json(j, record);
  return j.dump();
}

template <typename T>
std::vector<T> read_jsonl(const std::string& path, ParseMode mode = ParseMode::Strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      const auto j = ordered_json::parse(line);
      T rec;
      record_from_json(j, rec, mode);
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw JsonlError(line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw JsonlError(line_no, e.what());
    }
  }
  return out;
}

template <typename T>
void write_jsonl(const std::string& path, const std::vector<T>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& rec : records) {
    out << to_jsonl_line(rec) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace dpa

#endif  // DPA_JSONL_HPP
