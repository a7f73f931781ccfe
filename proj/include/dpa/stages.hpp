// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_STAGES_HPP
#define DPA_STAGES_HPP

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dpa/config.hpp"
#include "dpa/embedding_store.hpp"
#include "dpa/errors.hpp"
#include "dpa/gateway.hpp"
#include "dpa/gateway_http.hpp"
#include "dpa/jsonl.hpp"
#include "dpa/metrics.hpp"
#include "dpa/pref_data.hpp"
#include "dpa/retrieval.hpp"
#include "dpa/self_align.hpp"
#include "dpa/synthetic.hpp"
#include "dpa/train.hpp"

namespace dpa {

struct RunFlags {
  std::optional<bool> mock;  // overrides gateway.mock when set
  bool audit = false;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "retrieve",      "extract-pref", "augment",       "filter",
      "train-reranker", "rerank",       "emit-prealign", "emit-sft",
      "eval",          "report"};
  return names;
}

namespace detail {

inline void require_input(const std::string& path, const std::string& producer) {
  if (!std::filesystem::exists(path)) {
    throw MissingUpstreamError("missing input " + path + " (produced by " +
                               producer + ")");
  }
}

inline std::map<std::string, Document> load_corpus(const PipelineConfig& cfg) {
  const auto path = cfg.resolve(cfg.data.docs);
  require_input(path, "the corpus preparation step");
  std::map<std::string, Document> corpus;
  for (auto& d : read_jsonl<Document>(path)) {
    const std::string id = d.doc_id;
    if (!corpus.emplace(id, std::move(d)).second) {
      throw JsonlError(0, "duplicate doc_id in corpus: " + id);
    }
  }
  return corpus;
}

inline std::vector<QueryRecord> load_queries(const PipelineConfig& cfg) {
  const auto path = cfg.resolve(cfg.data.queries);
  require_input(path, "the corpus preparation step");
  return read_jsonl<QueryRecord>(path);
}

inline std::map<std::string, QueryRecord> index_queries(std::vector<QueryRecord> list) {
  std::map<std::string, QueryRecord> map;
  for (auto& q : list) {
    const std::string id = q.query_id;
    if (!map.emplace(id, std::move(q)).second) {
      throw JsonlError(0, "duplicate query_id: " + id);
    }
  }
  return map;
}

struct GatewayBundle {
  std::shared_ptr<Gateway> gateway;
  std::shared_ptr<std::ofstream> audit_stream;
};

/// Builds the reader gateway for a stage. Mock mode swaps in the fixture
/// reader seeded with the queries this stage touches, so every stage is
/// testable offline with deterministic outputs.
inline GatewayBundle make_gateway(const PipelineConfig& cfg, const RunFlags& flags,
                                  const std::vector<QueryRecord>& mock_knowledge,
                                  const std::string& stage) {
  const bool mock = flags.mock.value_or(cfg.gateway.mock);
  std::shared_ptr<LlmClient> client;
  if (mock) {
    client = std::make_shared<FixtureReader>(mock_knowledge);
  } else {
    client = std::make_shared<HttpChatClient>(cfg.gateway.base_url);
  }
  RetryPolicy policy{cfg.gateway.retry_base_ms, cfg.gateway.retry_factor,
                     cfg.gateway.retry_max_attempts};
  auto sleep = [](std::uint64_t ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  };
  GatewayBundle bundle;
  bundle.gateway = std::make_shared<Gateway>(std::move(client), policy,
                                             cfg.gateway.max_in_flight, sleep);
  if (flags.audit) {
    bundle.audit_stream = std::make_shared<std::ofstream>(
        cfg.resolve(stage + "_audit.jsonl"), std::ios::binary | std::ios::trunc);
    auto stream = bundle.audit_stream;
    bundle.gateway->set_audit(
        [stream](const nlohmann::ordered_json& entry) { *stream << entry.dump() << '\n'; });
  }
  return bundle;
}

inline void write_meta(const PipelineConfig& cfg, const std::string& stage,
                       nlohmann::ordered_json stats) {
  nlohmann::ordered_json meta;
  meta["stage"] = stage;
  meta["config_hash"] = cfg.config_hash;
  for (auto it = stats.begin(); it != stats.end(); ++it) meta[it.key()] = it.value();
  std::ofstream out(cfg.resolve(stage + ".meta.json"), std::ios::binary | std::ios::trunc);
  out << meta.dump(2) << '\n';
}

inline void log_stage(const PipelineConfig& cfg, const std::string& stage,
                      const std::string& message) {
  std::cout << "[" << stage << "] config=" << cfg.config_hash << " " << message
            << std::endl;
}

inline void write_failures(const std::string& path, const std::vector<QueryFailure>& failures) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& f : failures) {
    nlohmann::ordered_json j;
    j["query_id"] = f.query_id;
    j["error"] = f.error;
    out << j.dump() << '\n';
  }
}

inline std::string strategy_file(const PipelineConfig& cfg, const std::string& prefix,
                                 AugStrategy s) {
  std::string name = to_string(s);
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return cfg.resolve(prefix + name + ".jsonl");
}

inline std::vector<AugStrategy> expand_strategies(const std::vector<std::string>& names) {
  std::vector<AugStrategy> out;
  for (const auto& n : names) {
    if (n == "all") {
      for (auto s : all_strategies()) out.push_back(s);
    } else {
      out.push_back(aug_strategy_from(n));
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline void stage_retrieve(const PipelineConfig& cfg, const RunFlags&) {
  const auto store_path = cfg.resolve(cfg.data.store);
  detail::require_input(store_path, "the corpus preparation step");
  const auto store = load_store(store_path);
  auto queries = detail::load_queries(cfg);

  for (auto& q : queries) {
    auto result = dense_retrieve(q.embedding, store, cfg.retrieve.k, q.query_id);
    q.retrieved = std::move(result.hits);
  }
  write_jsonl(cfg.resolve(cfg.retrieve.output), queries);

  nlohmann::ordered_json stats;
  stats["queries"] = queries.size();
  stats["k"] = cfg.retrieve.k;
  detail::write_meta(cfg, "retrieve", stats);
  detail::log_stage(cfg, "retrieve",
                    "retrieved top-" + std::to_string(cfg.retrieve.k) + " for " +
                        std::to_string(queries.size()) + " queries");
}

inline void stage_extract_pref(const PipelineConfig& cfg, const RunFlags& flags) {
  const auto input = cfg.resolve(cfg.extract.input);
  detail::require_input(input, "retrieve");
  const auto queries = read_jsonl<QueryRecord>(input);
  const auto corpus = detail::load_corpus(cfg);
  auto bundle = detail::make_gateway(cfg, flags, queries, "extract-pref");

  ExtractOptions options;
  options.workers = cfg.extract.workers;
  const auto result = extract_preferences(queries, corpus, *bundle.gateway, options);

  write_jsonl(cfg.resolve(cfg.extract.output), result.samples);
  detail::write_failures(cfg.resolve(cfg.extract.failures), result.failures);
  {
    std::ofstream out(cfg.resolve(cfg.extract.outcomes), std::ios::binary | std::ios::trunc);
    for (const auto& o : result.outcomes) {
      nlohmann::ordered_json j;
      j["query_id"] = o.query_id;
      j["rank"] = o.rank;
      j["direct_correct"] = o.direct_correct;
      j["doc_correct"] = o.doc_correct;
      out << j.dump() << '\n';
    }
  }

  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.4f", result.retention_ratio());
  nlohmann::ordered_json stats;
  stats["queries"] = result.queries_seen;
  stats["retained"] = result.samples.size();
  stats["failures"] = result.failures.size();
  stats["retention_ratio"] = result.retention_ratio();
  detail::write_meta(cfg, "extract-pref", stats);
  detail::log_stage(cfg, "extract-pref",
                    "retained " + std::to_string(result.samples.size()) + "/" +
                        std::to_string(result.queries_seen) + " queries (ratio " +
                        ratio + ", failures " + std::to_string(result.failures.size()) +
                        ")");
}

inline void stage_augment(const PipelineConfig& cfg, const RunFlags& flags) {
  const auto input = cfg.resolve(cfg.augment.input);
  detail::require_input(input, "extract-pref");
  const auto samples = read_jsonl<PreferenceSample>(input);
  const auto corpus = detail::load_corpus(cfg);
  const auto queries_path = cfg.resolve(cfg.augment.queries);
  detail::require_input(queries_path, "retrieve");
  const auto query_list = read_jsonl<QueryRecord>(queries_path);
  const auto queries = detail::index_queries(query_list);
  auto bundle = detail::make_gateway(cfg, flags, query_list, "augment");

  std::vector<QueryFailure> failures;
  std::size_t emitted = 0;
  for (const AugStrategy strategy : detail::expand_strategies(cfg.augment.strategies)) {
    std::vector<AugmentedQuery> out;
    for (const auto& sample : samples) {
      if (sample.origin_query_id) continue;  // only original samples are rewritten
      try {
        auto qit = queries.find(sample.query_id);
        if (qit == queries.end()) {
          throw std::runtime_error("sample query not in query file: " + sample.query_id);
        }
        const QueryRecord& q = qit->second;
        std::vector<PromptDoc> top_docs;
        for (std::size_t i = 0; i < cfg.augment.top_k_docs && i < q.retrieved.size(); ++i) {
          const auto& d = corpus.at(q.retrieved[i].doc_id);
          top_docs.push_back({d.title, d.text});
        }
        if (top_docs.empty()) {
          throw std::runtime_error("query has no retrieved documents: " + sample.query_id);
        }
        out.push_back(augment_query(q, top_docs.front().title, top_docs, strategy,
                                    *bundle.gateway));
      } catch (const std::exception& e) {
        failures.push_back({sample.query_id + "#" + to_string(strategy), e.what()});
      }
    }
    write_jsonl(detail::strategy_file(cfg, cfg.augment.output_prefix, strategy), out);
    emitted += out.size();
  }
  detail::write_failures(cfg.resolve(cfg.augment.failures), failures);

  nlohmann::ordered_json stats;
  stats["emitted"] = emitted;
  stats["failures"] = failures.size();
  detail::write_meta(cfg, "augment", stats);
  detail::log_stage(cfg, "augment",
                    "emitted " + std::to_string(emitted) + " rewrites (failures " +
                        std::to_string(failures.size()) + ")");
}

inline void stage_filter(const PipelineConfig& cfg, const RunFlags& flags) {
  const auto query_list = detail::load_queries(cfg);
  const auto originals = detail::index_queries(query_list);

  std::vector<AugmentedQuery> all;
  for (const AugStrategy strategy : detail::expand_strategies(cfg.filter.strategies)) {
    const auto path = detail::strategy_file(cfg, cfg.filter.input_prefix, strategy);
    detail::require_input(path, "augment");
    auto batch = read_jsonl<AugmentedQuery>(path);
    all.insert(all.end(), std::make_move_iterator(batch.begin()),
               std::make_move_iterator(batch.end()));
  }

  const bool mock = flags.mock.value_or(cfg.gateway.mock);
  std::unique_ptr<NliScorer> scorer;
  detail::GatewayBundle bundle;
  if (mock) {
    scorer = std::make_unique<LexicalNliScorer>();
  } else {
    bundle = detail::make_gateway(cfg, flags, query_list, "filter");
    scorer = std::make_unique<RemoteNliScorer>(bundle.gateway);
  }

  const auto result = filter_augmented(all, originals, *scorer);
  write_jsonl(cfg.resolve(cfg.filter.output), result.retained);
  detail::write_failures(cfg.resolve(cfg.filter.failures), result.failures);

  char rate[32];
  std::snprintf(rate, sizeof rate, "%.4f", result.drop_rate());
  nlohmann::ordered_json stats;
  stats["judged"] = result.retained.size() + result.dropped;
  stats["retained"] = result.retained.size();
  stats["dropped"] = result.dropped;
  stats["drop_rate"] = result.drop_rate();
  stats["failures"] = result.failures.size();
  detail::write_meta(cfg, "filter", stats);
  detail::log_stage(cfg, "filter",
                    "retained " + std::to_string(result.retained.size()) + ", dropped " +
                        std::to_string(result.dropped) + " (rate " + rate + ")");
}

inline void stage_train_reranker(const PipelineConfig& cfg, const RunFlags& flags) {
  const auto input = cfg.resolve(cfg.train.input);
  detail::require_input(input, "extract-pref");
  auto samples = read_jsonl<PreferenceSample>(input);
  if (!cfg.train.augmented.empty()) {
    const auto aug_path = cfg.resolve(cfg.train.augmented);
    detail::require_input(aug_path, "filter");
    samples = merge_pref(samples, read_jsonl<AugmentedQuery>(aug_path));
  }

  const auto store_path = cfg.resolve(cfg.data.store);
  detail::require_input(store_path, "the corpus preparation step");
  const auto store = load_store(store_path);
  const auto corpus = detail::load_corpus(cfg);
  const auto queries_path = cfg.resolve(cfg.train.queries);
  detail::require_input(queries_path, "retrieve");
  const auto query_list = read_jsonl<QueryRecord>(queries_path);
  const auto queries = detail::index_queries(query_list);
  auto bundle = detail::make_gateway(cfg, flags, query_list, "train-reranker");

  TrainConfig tc;
  tc.seed = cfg.seed;
  tc.lr = cfg.train.lr;
  tc.epochs = cfg.train.epochs;
  tc.batch_size = cfg.train.batch_size;
  tc.a = cfg.train.a;
  tc.tau = cfg.train.tau;
  tc.mgda_every = cfg.train.mgda_every;
  tc.ordering = ordering_mode_from(cfg.train.score_mode);
  tc.fixed_weights = cfg.train.fixed_weights;
  tc.init_scale = cfg.train.init_scale;

  const auto data = build_train_data(samples, queries, corpus, store, *bundle.gateway, tc);
  RerankerModel model = init_model(store.dim(), tc.seed, tc.init_scale, tc.tau);
  const auto history = train(model, data, tc);

  save_model(model, cfg.resolve(cfg.train.model_out), cfg.config_hash);
  {
    std::ofstream out(cfg.resolve(cfg.train.history), std::ios::binary | std::ios::trunc);
    for (const auto& rec : history) out << step_to_json(rec).dump() << '\n';
  }

  nlohmann::ordered_json stats;
  stats["groups"] = data.groups.size();
  stats["steps"] = history.size();
  if (!history.empty()) {
    stats["final_loss_point"] = history.back().loss_point;
    stats["final_loss_pair"] = history.back().loss_pair;
    stats["final_loss_scl"] = history.back().loss_scl;
  }
  detail::write_meta(cfg, "train-reranker", stats);
  detail::log_stage(cfg, "train-reranker",
                    "trained on " + std::to_string(data.groups.size()) + " groups for " +
                        std::to_string(history.size()) + " steps");
}

inline void stage_rerank(const PipelineConfig& cfg, const RunFlags&) {
  const auto model_prefix = cfg.resolve(cfg.rerank.model);
  detail::require_input(model_prefix + ".dpae", "train-reranker");
  detail::require_input(model_prefix + ".json", "train-reranker");
  const auto model = load_model(model_prefix);

  const auto input = cfg.resolve(cfg.rerank.input);
  detail::require_input(input, "retrieve");
  auto queries = read_jsonl<QueryRecord>(input);

  const auto store_path = cfg.resolve(cfg.data.store);
  detail::require_input(store_path, "the corpus preparation step");
  const auto store = load_store(store_path);

  for (auto& q : queries) {
    q.retrieved = rerank(model, q, store, cfg.rerank.k);
  }
  write_jsonl(cfg.resolve(cfg.rerank.output), queries);

  nlohmann::ordered_json stats;
  stats["queries"] = queries.size();
  stats["k"] = cfg.rerank.k;
  detail::write_meta(cfg, "rerank", stats);
  detail::log_stage(cfg, "rerank",
                    "reranked " + std::to_string(queries.size()) + " queries to top-" +
                        std::to_string(cfg.rerank.k));
}

inline void stage_emit_prealign(const PipelineConfig& cfg, const RunFlags&) {
  const auto input = cfg.resolve(cfg.prealign.input);
  detail::require_input(input, "extract-pref");
  auto samples = read_jsonl<PreferenceSample>(input);
  if (!cfg.prealign.augmented.empty()) {
    const auto aug_path = cfg.resolve(cfg.prealign.augmented);
    detail::require_input(aug_path, "filter");
    samples = merge_pref(samples, read_jsonl<AugmentedQuery>(aug_path));
  }

  std::vector<Document> doc_list;
  for (auto& [id, d] : detail::load_corpus(cfg)) doc_list.push_back(d);
  const OrderedCorpus corpus(std::move(doc_list));
  const auto queries = detail::index_queries(detail::load_queries(cfg));

  std::vector<AlignmentRecord> records;
  for (const auto& sample : samples) {
    const std::string& resolve_id =
        sample.origin_query_id ? *sample.origin_query_id : sample.query_id;
    auto qit = queries.find(resolve_id);
    if (qit == queries.end()) {
      throw std::runtime_error("sample query not in query file: " + sample.query_id);
    }
    const std::string& text = sample.aug_text ? *sample.aug_text : qit->second.query;
    records.push_back(emit_prealigned(sample, corpus, text,
                                      qit->second.gold_answers.front(), cfg.prealign.k,
                                      cfg.seed));
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.query_id != b.query_id ? a.query_id < b.query_id : a.stage < b.stage;
  });
  write_jsonl(cfg.resolve(cfg.prealign.output), records);

  nlohmann::ordered_json stats;
  stats["records"] = records.size();
  detail::write_meta(cfg, "emit-prealign", stats);
  detail::log_stage(cfg, "emit-prealign",
                    "emitted " + std::to_string(records.size()) + " pre-aligned records");
}

inline void stage_emit_sft(const PipelineConfig& cfg, const RunFlags&) {
  const auto input = cfg.resolve(cfg.sft.input);
  detail::require_input(input, "rerank");
  const auto queries = read_jsonl<QueryRecord>(input);

  std::vector<Document> doc_list;
  for (auto& [id, d] : detail::load_corpus(cfg)) doc_list.push_back(d);
  const OrderedCorpus corpus(std::move(doc_list));

  std::vector<AlignmentRecord> records;
  for (const auto& q : queries) {
    std::vector<std::string> topk;
    for (const auto& h : q.retrieved) topk.push_back(h.doc_id);
    records.push_back(emit_sft(q, topk, corpus, cfg.seed));
  }
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.query_id < b.query_id; });
  write_jsonl(cfg.resolve(cfg.sft.output), records);

  nlohmann::ordered_json stats;
  stats["records"] = records.size();
  detail::write_meta(cfg, "emit-sft", stats);
  detail::log_stage(cfg, "emit-sft",
                    "emitted " + std::to_string(records.size()) + " SFT records");
}

inline void stage_eval(const PipelineConfig& cfg, const RunFlags& flags) {
  const auto input = cfg.resolve(cfg.eval.input);
  detail::require_input(input, "rerank (or retrieve)");
  const auto queries = read_jsonl<QueryRecord>(input);
  const auto corpus = detail::load_corpus(cfg);
  auto bundle = detail::make_gateway(cfg, flags, queries, "eval");

  double hits = 0.0;
  double f1 = 0.0;
  for (const auto& q : queries) {
    if (q.retrieved.size() < cfg.eval.k) {
      throw std::runtime_error("query " + q.query_id + " has " +
                               std::to_string(q.retrieved.size()) +
                               " documents, eval.k=" + std::to_string(cfg.eval.k));
    }
    std::vector<PromptDoc> docs;
    for (std::size_t i = 0; i < cfg.eval.k; ++i) {
      const auto& d = corpus.at(q.retrieved[i].doc_id);
      docs.push_back({d.title, d.text});
    }
    CompletionRequest req;
    req.prompt = sft_prompt(q.query, docs);
    req.temperature = cfg.gateway.temperature;
    req.max_tokens = cfg.gateway.max_tokens;
    req.model_name = cfg.gateway.model;
    const std::string reply = bundle.gateway->complete(req);
    hits += hit_at_1(reply, q.gold_answers);
    f1 += token_f1(reply, q.gold_answers);
  }
  const double n = queries.empty() ? 1.0 : static_cast<double>(queries.size());

  nlohmann::ordered_json metrics;
  metrics["hit_at_1"] = hits / n;
  metrics["f1"] = f1 / n;
  metrics["n"] = queries.size();
  {
    std::ofstream out(cfg.resolve(cfg.eval.output), std::ios::binary | std::ios::trunc);
    out << metrics.dump(2) << '\n';
  }

  detail::write_meta(cfg, "eval", metrics);
  char line[96];
  std::snprintf(line, sizeof line, "hit@1=%.4f f1=%.4f n=%zu", hits / n, f1 / n,
                queries.size());
  detail::log_stage(cfg, "eval", line);
}

inline void stage_report(const PipelineConfig& cfg, const RunFlags&) {
  const auto input = cfg.resolve(cfg.report.outcomes);
  detail::require_input(input, "extract-pref");

  std::vector<ExtractionOutcome> rows;
  {
    std::ifstream in(input, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      try {
        const auto j = nlohmann::ordered_json::parse(line);
        rows.push_back({j.at("query_id").get<std::string>(), j.at("rank").get<int>(),
                        j.at("direct_correct").get<bool>(),
                        j.at("doc_correct").get<bool>()});
      } catch (const nlohmann::json::exception& e) {
        throw JsonlError(line_no, e.what());
      }
    }
  }

  std::vector<std::pair<bool, bool>> pairs;
  for (const auto& r : rows) pairs.emplace_back(r.direct_correct, r.doc_correct);
  const auto report = category_report(pairs);

  std::map<int, std::array<std::size_t, 4>> by_rank;
  for (const auto& r : rows) {
    ++by_rank[r.rank][static_cast<int>(categorize(r.direct_correct, r.doc_correct))];
  }

  std::optional<TagMetrics> tags;
  if (!cfg.report.tags.empty()) {
    const auto tag_path = cfg.resolve(cfg.report.tags);
    detail::require_input(tag_path, "the tag annotation step");
    std::vector<std::vector<std::string>> tag_lists;
    std::ifstream in(tag_path, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      try {
        const auto j = nlohmann::ordered_json::parse(line);
        tag_lists.push_back(j.at("tags").get<std::vector<std::string>>());
      } catch (const nlohmann::json::exception& e) {
        throw JsonlError(line_no, e.what());
      }
    }
    tags = tag_metrics(tag_lists);
  }

  static const char* kLabels[4] = {"BothCorrect", "AlignedKnowledge",
                                   "UnalignedKnowledge", "BothIncorrect"};
  {
    std::ofstream out(cfg.resolve(cfg.report.output_txt), std::ios::binary | std::ios::trunc);
    char buf[128];
    out << "category              count  percent\n";
    for (int i = 0; i < 4; ++i) {
      std::snprintf(buf, sizeof buf, "%-20s %6zu  %7.2f\n", kLabels[i], report.counts[i],
                    report.percentages[i]);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%-20s %6zu  %7.2f\n", "total", report.total, 100.0);
    out << buf;
    out << "\nrank  BothCorrect  AlignedKnowledge  UnalignedKnowledge  BothIncorrect\n";
    for (const auto& [rank, counts] : by_rank) {
      std::snprintf(buf, sizeof buf, "%-4d  %11zu  %16zu  %18zu  %13zu\n", rank,
                    counts[0], counts[1], counts[2], counts[3]);
      out << buf;
    }
    if (tags) {
      std::snprintf(buf, sizeof buf, "\ntag complexity: %.6f\ntag diversity:  %.6f\n",
                    tags->complexity, tags->diversity);
      out << buf;
    }
  }
  {
    std::ofstream out(cfg.resolve(cfg.report.output_csv), std::ios::binary | std::ios::trunc);
    char buf[128];
    out << "section,key,count,percent\n";
    for (int i = 0; i < 4; ++i) {
      std::snprintf(buf, sizeof buf, "category,%s,%zu,%.4f\n", kLabels[i],
                    report.counts[i], report.percentages[i]);
      out << buf;
    }
    for (const auto& [rank, counts] : by_rank) {
      for (int i = 0; i < 4; ++i) {
        std::snprintf(buf, sizeof buf, "rank%d,%s,%zu,\n", rank, kLabels[i], counts[i]);
        out << buf;
      }
    }
    if (tags) {
      std::snprintf(buf, sizeof buf, "tags,complexity,,%.6f\ntags,diversity,,%.6f\n",
                    tags->complexity, tags->diversity);
      out << buf;
    }
  }

  nlohmann::ordered_json stats;
  stats["outcomes"] = rows.size();
  detail::write_meta(cfg, "report", stats);
  detail::log_stage(cfg, "report",
                    "categorized " + std::to_string(rows.size()) + " outcomes");
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline void run_stage(const std::string& name, const PipelineConfig& cfg,
                      const RunFlags& flags = {}) {
  if (name == "retrieve") return stage_retrieve(cfg, flags);
  if (name == "extract-pref") return stage_extract_pref(cfg, flags);
  if (name == "augment") return stage_augment(cfg, flags);
  if (name == "filter") return stage_filter(cfg, flags);
  if (name == "train-reranker") return stage_train_reranker(cfg, flags);
  if (name == "rerank") return stage_rerank(cfg, flags);
  if (name == "emit-prealign") return stage_emit_prealign(cfg, flags);
  if (name == "emit-sft") return stage_emit_sft(cfg, flags);
  if (name == "eval") return stage_eval(cfg, flags);
  if (name == "report") return stage_report(cfg, flags);
  throw std::invalid_argument("unknown stage: " + name);
}

// Exit codes for the CLI (and for scripting around it).
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUnknownStage = 2;
inline constexpr int kExitBadConfig = 3;
inline constexpr int kExitMissingUpstream = 4;
inline constexpr int kExitGateway = 5;
inline constexpr int kExitBadData = 6;

/// Stage runner with the CLI error contract: exit code by failure class and
/// a one-line machine-readable report on stderr.
inline int run_stage_cli(const std::string& name, const std::string& config_path,
                         const std::vector<std::string>& overrides = {},
                         const RunFlags& flags = {}) {
  auto report_error = [&](int code, const std::string& kind, const std::string& what) {
    nlohmann::ordered_json err;
    err["stage"] = name;
    err["code"] = code;
    err["kind"] = kind;
    err["error"] = what;
    std::cerr << err.dump() << std::endl;
    return code;
  };

  const auto& names = stage_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    return report_error(kExitUnknownStage, "unknown_stage", "unknown stage: " + name);
  }
  try {
    const auto cfg = load_config(config_path, overrides);
    run_stage(name, cfg, flags);
    return kExitOk;
  } catch (const ConfigError& e) {
    return report_error(kExitBadConfig, "config", e.what());
  } catch (const MissingUpstreamError& e) {
    return report_error(kExitMissingUpstream, "missing_upstream", e.what());
  } catch (const GatewayError& e) {
    return report_error(kExitGateway, "gateway", e.what());
  } catch (const FormatError& e) {
    return report_error(kExitBadData, "format", e.what());
  } catch (const JsonlError& e) {
    return report_error(kExitBadData, "jsonl", e.what());
  } catch (const std::exception& e) {
    return report_error(kExitRuntime, "runtime", e.what());
  }
}

}  // namespace dpa

#endif  // DPA_STAGES_HPP
