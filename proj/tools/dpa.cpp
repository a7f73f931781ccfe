// SPDX-License-Identifier: Apache-2.0

// dpa — preference-aligned reranking pipeline driver.
//
// Every subcommand is one pipeline stage reading one JSON config (see
// README.md for the schema). --mock swaps all remote model calls for
// deterministic offline fixtures.

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpa/stages.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dpa: align a document reranker with a reader model's knowledge preferences"};
  app.require_subcommand(1);

  struct StageArgs {
    std::string config;
    std::vector<std::string> overrides;
    bool mock = false;
    bool audit = false;
    std::string strategy;
  };

  static const std::map<std::string, std::string> descriptions = {
      {"retrieve", "fill each query's top-k retrieval list from the embedding store"},
      {"extract-pref", "mine preference labels by querying the reader with/without documents"},
      {"augment", "rewrite queries with the five augmentation strategies"},
      {"filter", "drop augmented queries that contradict the original (NLI)"},
      {"train-reranker", "train the bilinear reranker with the three weighted losses"},
      {"rerank", "re-order retrieval lists with the trained reranker"},
      {"emit-prealign", "emit pre-aligned-stage training records"},
      {"emit-sft", "emit SFT-stage training records"},
      {"eval", "score reader answers (hit@1, token F1) over a document file"},
      {"report", "category table and tag complexity/diversity report"},
  };

  std::map<std::string, std::shared_ptr<StageArgs>> args;
  for (const auto& name : dpa::stage_names()) {
    auto a = std::make_shared<StageArgs>();
    args[name] = a;
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("--config", a->config, "pipeline config JSON")->required();
    sub->add_option("--set", a->overrides,
                    "config override, e.g. --set train.epochs=40");
    sub->add_flag("--mock", a->mock, "use deterministic offline mocks");
    sub->add_flag("--audit", a->audit, "write <stage>_audit.jsonl call log");
    if (name == "augment") {
      sub->add_option("--strategy", a->strategy,
                      "Rephrasing|Complexity|Decomposition|Constraint|SPARQL|all");
    }
  }

  CLI11_PARSE(app, argc, argv);

  for (const auto& name : dpa::stage_names()) {
    if (!app.got_subcommand(name)) continue;
    auto a = args[name];
    auto overrides = a->overrides;
    if (!a->strategy.empty()) {
      overrides.push_back("augment.strategies=[\"" + a->strategy + "\"]");
    }
    dpa::RunFlags flags;
    if (a->mock) flags.mock = true;
    flags.audit = a->audit;
    return dpa::run_stage_cli(name, a->config, overrides, flags);
  }
  return dpa::kExitUnknownStage;
}
