// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_CONFIG_HPP
#define DPA_CONFIG_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dpa/errors.hpp"
#include "dpa/rng.hpp"
#include "dpa/types.hpp"
#include "json.hpp"

namespace dpa {

/// One JSON document configures the whole pipeline: a shared section plus
/// one section per stage. Relative paths resolve against the directory the
/// config file lives in, so a config can be copied together with its data.
struct PipelineConfig {
  std::filesystem::path base_dir;
  std::string config_hash;

  std::uint64_t seed = 1234;

  struct Gateway {
    bool mock = true;
    std::string base_url;
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 256;
    std::size_t max_in_flight = 4;
    std::uint64_t retry_base_ms = 1000;
    std::uint64_t retry_factor = 2;
    int retry_max_attempts = 5;
  } gateway;

  struct Data {
    std::string docs = "docs.jsonl";
    std::string queries = "queries_train.jsonl";
    std::string store = "corpus.dpae";
  } data;

  struct Retrieve {
    std::size_t k = 100;
    std::string output = "retrieved.jsonl";
  } retrieve;

  struct Extract {
    std::string input = "retrieved.jsonl";
    std::string output = "pref.jsonl";
    std::string outcomes = "outcomes.jsonl";
    std::string failures = "extract_failures.jsonl";
    std::size_t workers = 1;
  } extract;

  struct Augment {
    std::string input = "pref.jsonl";
    std::string queries = "retrieved.jsonl";  // provides the top docs per query
    std::vector<std::string> strategies = {"all"};
    std::size_t top_k_docs = 3;
    std::string output_prefix = "aug_";
    std::string failures = "augment_failures.jsonl";
  } augment;

  struct Filter {
    std::string input_prefix = "aug_";
    std::vector<std::string> strategies = {"all"};
    std::string output = "aug_filtered.jsonl";
    std::string failures = "filter_failures.jsonl";
  } filter;

  struct Train {
    std::string input = "pref.jsonl";
    std::string queries = "retrieved.jsonl";  // retriever scores per subset rank
    std::string augmented;  // optional merged-in augmented set
    std::string model_out = "reranker";
    std::string history = "train_history.jsonl";
    double lr = 0.05;
    int epochs = 10;
    std::size_t batch_size = 32;
    double a = 0.8;
    double tau = 0.07;
    int mgda_every = 1;
    std::string score_mode = "logit";
    std::optional<std::array<double, 3>> fixed_weights;
    double init_scale = 0.01;
  } train;

  struct Rerank {
    std::string input = "retrieved.jsonl";
    std::string model = "reranker";
    std::size_t k = 3;
    std::string output = "reranked.jsonl";
  } rerank;

  struct Prealign {
    std::string input = "pref.jsonl";
    std::string augmented;  // optional merged-in augmented set
    int k = 3;
    std::string output = "prealign.jsonl";
  } prealign;

  struct Sft {
    std::string input = "reranked.jsonl";
    std::string output = "sft.jsonl";
  } sft;

  struct Eval {
    std::string input = "reranked.jsonl";
    std::size_t k = 3;
    std::string output = "metrics.json";
  } eval;

  struct Report {
    std::string outcomes = "outcomes.jsonl";
    std::string tags;  // optional tag annotation file
    std::string output_txt = "report.txt";
    std::string output_csv = "report.csv";
  } report;

  std::string resolve(const std::string& rel) const {
    std::filesystem::path p(rel);
    if (p.is_absolute()) return p.string();
    return (base_dir / p).string();
  }
};

namespace detail {

class SectionReader {
 public:
  SectionReader(const nlohmann::ordered_json& j, std::string name)
      : obj_(j), name_(std::move(name)) {
    if (!obj_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) const {
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(name_ + "." + key + " has the wrong type");
    }
  }

 private:
  const nlohmann::ordered_json& obj_;
  std::string name_;
};

inline void apply_override(nlohmann::ordered_json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value: " + spec);
  }
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  nlohmann::ordered_json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("empty key in override: " + spec);
    if (dot == std::string::npos) {
      try {
        (*node)[key] = nlohmann::ordered_json::parse(value);
      } catch (const nlohmann::json::exception&) {
        (*node)[key] = value;  // unquoted strings are taken literally
      }
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::ordered_json& j,
                                   const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  static const std::vector<std::string> known = {
      "seed",    "gateway", "data",     "retrieve", "extract", "augment",
      "filter",  "train",   "rerank",   "prealign", "sft",     "eval",
      "report"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("unknown config section '" + it.key() + "'");
    }
  }

  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  cfg.config_hash = [&] {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump())));
    return std::string(buf);
  }();

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      throw ConfigError("seed must be an integer");
    }
    cfg.seed = j["seed"].get<std::uint64_t>();
  }

  if (j.contains("gateway")) {
    detail::SectionReader r(j["gateway"], "gateway");
    r.get("mock", cfg.gateway.mock);
    r.get("base_url", cfg.gateway.base_url);
    r.get("model", cfg.gateway.model);
    r.get("temperature", cfg.gateway.temperature);
    r.get("max_tokens", cfg.gateway.max_tokens);
    r.get("max_in_flight", cfg.gateway.max_in_flight);
    r.get("retry_base_ms", cfg.gateway.retry_base_ms);
    r.get("retry_factor", cfg.gateway.retry_factor);
    r.get("retry_max_attempts", cfg.gateway.retry_max_attempts);
  }
  if (j.contains("data")) {
    detail::SectionReader r(j["data"], "data");
    r.get("docs", cfg.data.docs);
    r.get("queries", cfg.data.queries);
    r.get("store", cfg.data.store);
  }
  if (j.contains("retrieve")) {
    detail::SectionReader r(j["retrieve"], "retrieve");
    r.get("k", cfg.retrieve.k);
    r.get("output", cfg.retrieve.output);
  }
  if (j.contains("extract")) {
    detail::SectionReader r(j["extract"], "extract");
    r.get("input", cfg.extract.input);
    r.get("output", cfg.extract.output);
    r.get("outcomes", cfg.extract.outcomes);
    r.get("failures", cfg.extract.failures);
    r.get("workers", cfg.extract.workers);
  }
  if (j.contains("augment")) {
    detail::SectionReader r(j["augment"], "augment");
    r.get("input", cfg.augment.input);
    r.get("queries", cfg.augment.queries);
    r.get("strategies", cfg.augment.strategies);
    r.get("top_k_docs", cfg.augment.top_k_docs);
    r.get("output_prefix", cfg.augment.output_prefix);
    r.get("failures", cfg.augment.failures);
  }
  if (j.contains("filter")) {
    detail::SectionReader r(j["filter"], "filter");
    r.get("input_prefix", cfg.filter.input_prefix);
    r.get("strategies", cfg.filter.strategies);
    r.get("output", cfg.filter.output);
    r.get("failures", cfg.filter.failures);
  }
  if (j.contains("train")) {
    detail::SectionReader r(j["train"], "train");
    r.get("input", cfg.train.input);
    r.get("queries", cfg.train.queries);
    r.get("augmented", cfg.train.augmented);
    r.get("model_out", cfg.train.model_out);
    r.get("history", cfg.train.history);
    r.get("lr", cfg.train.lr);
    r.get("epochs", cfg.train.epochs);
    r.get("batch_size", cfg.train.batch_size);
    r.get("a", cfg.train.a);
    r.get("tau", cfg.train.tau);
    r.get("mgda_every", cfg.train.mgda_every);
    r.get("score_mode", cfg.train.score_mode);
    if (j["train"].contains("fixed_weights") && !j["train"]["fixed_weights"].is_null()) {
      try {
        cfg.train.fixed_weights = j["train"]["fixed_weights"].get<std::array<double, 3>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("train.fixed_weights must be an array of 3 numbers");
      }
    }
    r.get("init_scale", cfg.train.init_scale);
  }
  if (j.contains("rerank")) {
    detail::SectionReader r(j["rerank"], "rerank");
    r.get("input", cfg.rerank.input);
    r.get("model", cfg.rerank.model);
    r.get("k", cfg.rerank.k);
    r.get("output", cfg.rerank.output);
  }
  if (j.contains("prealign")) {
    detail::SectionReader r(j["prealign"], "prealign");
    r.get("input", cfg.prealign.input);
    r.get("augmented", cfg.prealign.augmented);
    r.get("k", cfg.prealign.k);
    r.get("output", cfg.prealign.output);
  }
  if (j.contains("sft")) {
    detail::SectionReader r(j["sft"], "sft");
    r.get("input", cfg.sft.input);
    r.get("output", cfg.sft.output);
  }
  if (j.contains("eval")) {
    detail::SectionReader r(j["eval"], "eval");
    r.get("input", cfg.eval.input);
    r.get("k", cfg.eval.k);
    r.get("output", cfg.eval.output);
  }
  if (j.contains("report")) {
    detail::SectionReader r(j["report"], "report");
    r.get("outcomes", cfg.report.outcomes);
    r.get("tags", cfg.report.tags);
    r.get("output_txt", cfg.report.output_txt);
    r.get("output_csv", cfg.report.output_csv);
  }

  // Range checks that every stage relies on.
  if (cfg.retrieve.k == 0) throw ConfigError("retrieve.k must be >= 1");
  if (cfg.rerank.k == 0) throw ConfigError("rerank.k must be >= 1");
  if (cfg.eval.k == 0) throw ConfigError("eval.k must be >= 1");
  if (cfg.prealign.k < 1) throw ConfigError("prealign.k must be >= 1");
  if (!(cfg.train.a >= 0.0 && cfg.train.a <= 1.0)) {
    throw ConfigError("train.a must lie in [0, 1]");
  }
  if (!(cfg.train.tau > 0.0)) throw ConfigError("train.tau must be > 0");
  if (cfg.train.lr < 0.0) throw ConfigError("train.lr must be >= 0");
  if (cfg.train.epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (cfg.train.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (cfg.train.mgda_every < 1) throw ConfigError("train.mgda_every must be >= 1");
  if (cfg.train.score_mode != "logit" && cfg.train.score_mode != "rating" &&
      cfg.train.score_mode != "pairwise") {
    throw ConfigError("train.score_mode must be logit|rating|pairwise");
  }
  if (cfg.gateway.retry_max_attempts < 1) {
    throw ConfigError("gateway.retry_max_attempts must be >= 1");
  }
  if (cfg.gateway.max_in_flight == 0) {
    throw ConfigError("gateway.max_in_flight must be >= 1");
  }
  if (cfg.augment.top_k_docs == 0) throw ConfigError("augment.top_k_docs must be >= 1");
  for (const auto& s : cfg.augment.strategies) {
    if (s != "all") aug_strategy_from(s);  // throws on junk
  }
  for (const auto& s : cfg.filter.strategies) {
    if (s != "all") aug_strategy_from(s);
  }
  return cfg;
}

inline PipelineConfig load_config(const std::string& path,
                                  const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file not found: " + path);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  for (const auto& o : overrides) detail::apply_override(j, o);
  try {
    return parse_config(j, std::filesystem::absolute(path).parent_path());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace dpa

#endif  // DPA_CONFIG_HPP
