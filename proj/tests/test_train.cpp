// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <sstream>

#include "dpa/train.hpp"
#include "support/reference.hpp"

using namespace dpa;

namespace {

/// Hand-built separable training set: aligned documents point along the
/// query direction, unaligned ones against it, so W = c*I separates.
TrainData separable_fixture(std::size_t n_groups, std::size_t dim, std::uint64_t seed) {
  TrainData data;
  data.dim = dim;
  SplitMix64 rng(seed);
  static const int kRanks[4] = {1, 25, 50, 100};
  for (std::size_t g = 0; g < n_groups; ++g) {
    SampleGroup group;
    group.query_id = "g" + std::to_string(g);
    group.q_emb = dpa_test::random_vec(rng, dim);
    double norm = 0.0;
    for (double v : group.q_emb) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : group.q_emb) v /= norm;

    for (int i = 0; i < 4; ++i) {
      GroupDoc doc;
      doc.doc_id = group.query_id + "_d" + std::to_string(i);
      doc.retriever_rank = kRanks[i];
      doc.retriever_score = 4.0 - i;
      const bool aligned = i < 2;
      doc.label = aligned ? PreferenceLabel::AlignedKnowledge
                          : PreferenceLabel::UnalignedKnowledge;
      doc.emb.resize(dim);
      for (std::size_t a = 0; a < dim; ++a) {
        doc.emb[a] = (aligned ? 1.0 : -1.0) * group.q_emb[a] + 0.05 * rng.next_gaussian();
      }
      group.docs.push_back(std::move(doc));
    }
    group.order.scores = {3, 2, 1, 0};
    group.order.order = {0, 1, 2, 3};
    group.pairs = make_pairs(group.order);
    data.groups.push_back(std::move(group));
  }
  return data;
}

}  // namespace

TEST_CASE("point-loss-only training decreases monotonically on a separable fixture") {
  const auto data = separable_fixture(12, 4, 2024);
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.lr = 0.5;
  cfg.epochs = 200;
  cfg.batch_size = 64;  // full batch: plain gradient descent
  cfg.fixed_weights = std::array<double, 3>{1.0, 0.0, 0.0};

  RerankerModel model = init_model(4, cfg.seed, 0.01);
  const auto history = train(model, data, cfg);
  REQUIRE(history.size() == 200);
  for (std::size_t i = 1; i < history.size(); ++i) {
    CHECK(history[i].loss_point <= history[i - 1].loss_point + 1e-12);
  }
  CHECK(history.back().loss_point < 0.1);
  for (const auto& rec : history) {
    CHECK(rec.weights == std::array<double, 3>{1.0, 0.0, 0.0});
  }
}

TEST_CASE("zero learning rate leaves the model bit-exact") {
  const auto data = separable_fixture(4, 3, 7);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 3;
  RerankerModel model = init_model(3, 99, 0.2);
  const RerankerModel before = model;
  train(model, data, cfg);
  CHECK(model.W == before.W);
  CHECK(model.b == before.b);
}

TEST_CASE("same seed gives identical history, models, and serialized bytes") {
  const auto data = separable_fixture(6, 4, 17);
  TrainConfig cfg;
  cfg.seed = 4242;
  cfg.lr = 0.1;
  cfg.epochs = 5;
  cfg.batch_size = 2;

  auto run = [&] {
    RerankerModel model = init_model(4, cfg.seed, 0.05);
    const auto history = train(model, data, cfg);
    std::ostringstream out;
    for (const auto& rec : history) out << step_to_json(rec).dump() << '\n';
    return std::pair{model, out.str()};
  };
  const auto [m1, h1] = run();
  const auto [m2, h2] = run();
  CHECK(m1.W == m2.W);
  CHECK(m1.b == m2.b);
  CHECK(h1 == h2);
}

TEST_CASE("MGDA-weighted training keeps weights on the simplex") {
  const auto data = separable_fixture(6, 4, 31);
  TrainConfig cfg;
  cfg.seed = 9;
  cfg.lr = 0.05;
  cfg.epochs = 4;
  cfg.batch_size = 3;
  cfg.mgda_every = 2;

  RerankerModel model = init_model(4, cfg.seed, 0.05);
  const auto history = train(model, data, cfg);
  for (const auto& rec : history) {
    double sum = 0.0;
    for (double c : rec.weights) {
      CHECK(c >= 0.0);
      sum += c;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("non-finite losses abort with the failing step") {
  TrainData data = separable_fixture(2, 3, 3);
  for (auto& group : data.groups) {
    for (double& v : group.q_emb) v *= 1e100;
    for (auto& doc : group.docs) {
      for (double& v : doc.emb) v *= 1e100;
    }
  }
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.epochs = 5;
  try {
    RerankerModel model = init_model(3, 1, 0.01);
    train(model, data, cfg);
    FAIL("expected TrainDivergence");
  } catch (const TrainDivergence& e) {
    CHECK(e.step() >= 0);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("rerank returns the model's top-k with retriever-rank ties") {
  const std::size_t dim = 4;
  EmbeddingStore store(dim);
  store.add("a", std::vector<float>{1, 0, 0, 0});
  store.add("b", std::vector<float>{0, 1, 0, 0});
  store.add("c", std::vector<float>{0, 0, 1, 0});
  store.add("planted", std::vector<float>{0, 0, 0, 1});

  QueryRecord q;
  q.query_id = "q";
  q.query = "?";
  q.gold_answers = {"x"};
  q.embedding = {0, 0, 0, 1};
  q.retrieved = {{"a", 4.0f}, {"b", 3.0f}, {"c", 2.0f}, {"planted", 1.0f}};

  SECTION("identity-like model lifts the planted document to the top") {
    RerankerModel model;
    model.dim = dim;
    model.W.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) model.W[i * dim + i] = 1.0;
    model.b = 0.0;
    const auto top = rerank(model, q, store, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].doc_id == "planted");
  }
  SECTION("zero model preserves retriever order") {
    RerankerModel model;
    model.dim = dim;
    model.W.assign(dim * dim, 0.0);
    model.b = 0.0;
    const auto top = rerank(model, q, store, 4);
    CHECK(top[0].doc_id == "a");
    CHECK(top[1].doc_id == "b");
    CHECK(top[2].doc_id == "c");
    CHECK(top[3].doc_id == "planted");
  }
  SECTION("k = 0 and oversized k are errors") {
    RerankerModel model;
    model.dim = dim;
    model.W.assign(dim * dim, 0.0);
    CHECK_THROWS_AS(rerank(model, q, store, 0), std::invalid_argument);
    CHECK_THROWS_AS(rerank(model, q, store, 5), std::invalid_argument);
  }
}

TEST_CASE("build_train_data resolves embeddings and freezes orders") {
  // one query, subset docs at ranks 1/25/50/100, logit scoring via mock
  const std::size_t dim = 4;
  EmbeddingStore store(dim);
  std::map<std::string, Document> corpus;
  QueryRecord q;
  q.query_id = "q1";
  q.query = "which doc";
  q.gold_answers = {"gold"};
  q.embedding = {1, 0, 0, 0};
  for (int r = 1; r <= 100; ++r) {
    const std::string id = "d" + std::to_string(r);
    std::vector<float> emb = {0, 0, 0, 0};
    emb[static_cast<std::size_t>(r) % dim] = 1.0f;
    q.retrieved.push_back({id, static_cast<float>(200 - r)});
    if (r == 1 || r == 25 || r == 50 || r == 100) {
      store.add(id, emb);
      Document d;
      d.doc_id = id;
      d.title = "t" + id;
      d.text = "body " + id;
      corpus[id] = std::move(d);
    }
  }

  PreferenceSample s;
  s.query_id = "q1";
  s.subset = {{1, "d1", PreferenceLabel::BothIncorrect},
              {25, "d25", PreferenceLabel::AlignedKnowledge},
              {50, "d50", PreferenceLabel::BothIncorrect},
              {100, "d100", PreferenceLabel::UnalignedKnowledge}};

  auto mock = std::make_shared<MockChatClient>();
  // reader logits: rank-25 doc the clear winner
  const double logits[4] = {-10.0, 0.0, -10.0, -10.0};
  const char* ids[4] = {"d1", "d25", "d50", "d100"};
  for (int i = 0; i < 4; ++i) {
    const auto& d = corpus[ids[i]];
    mock->add_reply(sft_prompt(q.query, {{d.title, d.text}}), "reply", logits[i]);
  }
  Gateway gw(mock);

  std::map<std::string, QueryRecord> queries = {{"q1", q}};
  TrainConfig cfg;
  cfg.ordering = OrderingMode::Logit;
  cfg.a = 0.8;
  const auto data = build_train_data({s}, queries, corpus, store, gw, cfg);

  REQUIRE(data.groups.size() == 1);
  const auto& group = data.groups[0];
  REQUIRE(group.docs.size() == 4);
  // normalized logits: [0,1,0,0]; normalized retriever: [1,~,~,0]
  // fused: d25 wins, then d1 by retriever score
  CHECK(group.order.order[0] == 1);
  CHECK(group.order.order[1] == 0);
  CHECK(group.pairs.size() == 6);
  CHECK(group.q_emb == Vec{1, 0, 0, 0});
}
