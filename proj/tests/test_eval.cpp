// Copyright 2026 The lingmem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "lingmem/lingmem.hpp"
#include "test_util.hpp"

namespace lingmem {
namespace {

using testing::mention;

class EvalCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = new Corpus(make_synthetic(testing::small_spec(12)));
    store_ = new MemoryStore(MemoryStore::from_corpus(*corpus_, 128, testing::small_hnsw()));
    queries_ = new std::vector<Query>(corpus_queries(*corpus_));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete store_;
    delete queries_;
  }
  static std::vector<Query> of_class(const std::string& k) {
    std::vector<Query> out;
    for (const auto& q : *queries_) {
      if (q.query_class == k) out.push_back(q);
    }
    return out;
  }
  static Corpus* corpus_;
  static MemoryStore* store_;
  static std::vector<Query>* queries_;
};
Corpus* EvalCorpus::corpus_ = nullptr;
MemoryStore* EvalCorpus::store_ = nullptr;
std::vector<Query>* EvalCorpus::queries_ = nullptr;

// ---------------------------------------------------------------------------
// Factual recall

TEST_F(EvalCorpus, WholeStoreRetrievedRecallsEverything) {
  RetrievalConfig cfg;
  cfg.exact_dense = true;
  cfg.k = store_->size();
  cfg.dense_n = cfg.k;
  const auto r = eval_fr(*store_, *queries_, cfg);
  EXPECT_EQ(r.fr, 1.0);
  EXPECT_EQ(r.total, queries_->size());
}

TEST(Fr, AbsentGoldIsNotRecalled) {
  MemoryStore store(2);
  store.add(testing::make_entry("d", 0, 0, "nothing relevant", {1, 0}));
  Query q;
  q.embedding.values = {1, 0};
  q.gold = GoldInfo{{42}, "", std::nullopt};
  EXPECT_EQ(eval_fr(store, std::vector<Query>{q}, RetrievalConfig{}).fr, 0.0);
  q.gold = GoldInfo{{}, "Nothing   RELEVANT", std::nullopt};
  EXPECT_EQ(eval_fr(store, std::vector<Query>{q}, RetrievalConfig{}).fr, 1.0);
  q.gold.reset();
  EXPECT_THROW(eval_fr(store, std::vector<Query>{q}, RetrievalConfig{}), Error);
}

TEST_F(EvalCorpus, MatchesSetMembershipOracle) {
  for (std::size_t k : {1u, 3u, 5u}) {
    RetrievalConfig cfg;
    cfg.k = k;
    const auto r = eval_fr(*store_, *queries_, cfg);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < queries_->size(); ++i) {
      const auto& q = (*queries_)[i];
      bool hit = false;
      for (const auto& res : retrieve(*store_, q, cfg)) {
        const auto& ids = q.gold->supporting_entry_ids;
        hit = hit || std::count(ids.begin(), ids.end(), res.entry_id) > 0;
        std::string text = store_->entry(res.entry_id).utterance;
        std::string span = q.gold->answer_span;
        for (auto* s : {&text, &span}) std::transform(s->begin(), s->end(), s->begin(), ::tolower);
        hit = hit || (!span.empty() && text.find(span) != std::string::npos);
      }
      EXPECT_EQ(hit, r.per_query[i].recalled) << q.id;
      hits += hit;
    }
    EXPECT_DOUBLE_EQ(r.fr, static_cast<double>(hits) / static_cast<double>(queries_->size()));
  }
}

TEST_F(EvalCorpus, RecallIsMonotoneInK) {
  double prev = 0.0;
  for (std::size_t k = 1; k <= 12; ++k) {
    RetrievalConfig cfg;
    cfg.exact_dense = true;
    cfg.k = k;
    cfg.dense_n = 50;
    const double fr = eval_fr(*store_, *queries_, cfg).fr;
    EXPECT_GE(fr, prev) << "k=" << k;
    prev = fr;
  }
}

TEST_F(EvalCorpus, DefaultsBeatDenseOnly) {
  const auto variants = ablation_variants(RetrievalConfig{});
  const double full = eval_fr(*store_, *queries_, variants.front().config).fr;
  const double dense = eval_fr(*store_, *queries_, variants.back().config).fr;
  EXPECT_GE(full - dense, 0.1);
}

// ---------------------------------------------------------------------------
// Discourse coherence

TEST(Dc, QueryScores) {
  MemoryStore store(2);
  auto a = testing::make_entry("d", 0, 0, "John Smith", {1, 0});
  a.entities = {mention("John Smith", "E1")};
  auto b = testing::make_entry("d", 0, 1, "John Smith and Ann", {0, 1});
  b.entities = {mention("John Smith", "E2"), mention("Ann", "E3"), mention("Zed", "E9")};
  store.add_all({a, b});
  Query q;
  q.gold = GoldInfo{{0}, "", std::map<std::string, std::string>{{"john  smith", "E1"}, {"Ann", "E3"}}};
  const std::vector<RankedResult> only_a{{0, 0, 0, 0, 0}};
  const std::vector<RankedResult> only_b{{1, 0, 0, 0, 0}};
  const std::vector<RankedResult> both{{0, 0, 0, 0, 0}, {1, 0, 0, 0, 0}};
  EXPECT_EQ(query_dc(q, only_a, store), 1.0);
  EXPECT_EQ(query_dc(q, only_b, store), 0.5);
  EXPECT_NEAR(*query_dc(q, both, store), 2.0 / 3.0, 1e-12);

  auto single_wrong = q;
  single_wrong.gold->coref_assignments = std::map<std::string, std::string>{{"John Smith", "E7"}};
  EXPECT_EQ(query_dc(single_wrong, only_a, store), 0.0);

  auto nothing = q;
  nothing.gold->coref_assignments = std::map<std::string, std::string>{{"Bob", "E4"}};
  EXPECT_FALSE(query_dc(nothing, both, store).has_value());
  nothing.gold->coref_assignments.reset();
  EXPECT_FALSE(query_dc(nothing, both, store).has_value());

  const auto agg = aggregate_dc({1.0, 0.5, std::nullopt});
  EXPECT_EQ(agg.dc, 0.75);
  EXPECT_EQ(agg.scored_queries, 2u);
  EXPECT_EQ(agg.excluded_queries, 1u);
  EXPECT_THROW(aggregate_dc({std::nullopt}), Error);
}

TEST_F(EvalCorpus, SyntheticCoherenceIsDefined) {
  const auto r = evaluate(*store_, *queries_, RetrievalConfig{});
  ASSERT_TRUE(r.dc.has_value());
  EXPECT_GT(*r.dc, 0.9);
  EXPECT_LE(*r.dc, 1.0);
}

// ---------------------------------------------------------------------------
// Ablation

TEST(Ablation, VariantConfigs) {
  const auto v = ablation_variants(RetrievalConfig{});
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v[0].name, "full");
  EXPECT_EQ(v[1].name, "no-discourse");
  EXPECT_EQ(v[1].config.weights, (FusionWeights{0.7, 0.3, 0.0}));
  EXPECT_EQ(v[2].name, "no-coref");
  EXPECT_FALSE(v[2].config.use_coref);
  EXPECT_EQ(v[3].name, "no-dep");
  EXPECT_FALSE(v[3].config.use_dep_keys);
  EXPECT_EQ(v[4].name, "dense-only");
  EXPECT_EQ(v[4].config.weights, (FusionWeights{1.0, 0.0, 0.0}));
  EXPECT_EQ(v[4].config.symbolic_cap, 0u);
}

TEST_F(EvalCorpus, DenseOnlyIsPureCosineRanking) {
  const auto dense = ablation_variants(RetrievalConfig{}).back().config;
  auto exact = dense;
  exact.exact_dense = true;
  exact.dense_n = store_->size();
  for (const auto& q : *queries_) {
    const auto r = retrieve(*store_, q, exact);
    // Independent ranking by cosine alone.
    std::vector<std::pair<double, EntryId>> all;
    for (const auto& [id, e] : store_->entries()) all.push_back({dot(e.embedding.values, q.embedding.values), id});
    std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      const auto& ta = store_->entry(a.second).timestamp;
      const auto& tb = store_->entry(b.second).timestamp;
      if (ta != tb) return ta > tb;
      return a.second < b.second;
    });
    ASSERT_EQ(r.size(), exact.k);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].entry_id, all[i].second);
  }
}

TEST_F(EvalCorpus, AblationOrdering) {
  const auto rows = run_ablation(*store_, *queries_, RetrievalConfig{});
  ASSERT_EQ(rows.size(), 5u);
  const double full = rows[0].report.fr, no_dep = rows[3].report.fr, dense = rows[4].report.fr;
  EXPECT_GE(full, no_dep);
  EXPECT_GE(no_dep, dense);
  EXPECT_EQ(rows[0].delta_fr, 0.0);
  EXPECT_DOUBLE_EQ(rows[4].delta_fr, dense - full);

  const auto entity = of_class("entity");
  const auto discourse = of_class("discourse");
  ASSERT_FALSE(entity.empty());
  RetrievalConfig base;
  EXPECT_LT(eval_fr(*store_, entity, ablation_variants(base)[2].config).fr, eval_fr(*store_, entity, base).fr);
  EXPECT_LT(eval_fr(*store_, discourse, ablation_variants(base)[1].config).fr, eval_fr(*store_, discourse, base).fr);
  const auto j = ablation_to_json(rows);
  EXPECT_EQ(j.size(), 5u);
  EXPECT_EQ(j[4]["variant"], "dense-only");
}

TEST_F(EvalCorpus, ReportsAreDeterministic) {
  const auto a = evaluate(*store_, *queries_, RetrievalConfig{});
  const auto b = evaluate(*store_, *queries_, RetrievalConfig{});
  EXPECT_EQ(canonical_dump(a.to_json()), canonical_dump(b.to_json()));
  EXPECT_FALSE(a.fr_std.has_value());
  const auto three = evaluate(*store_, *queries_, RetrievalConfig{}, 3);
  EXPECT_EQ(three.fr, a.fr);
  ASSERT_TRUE(three.fr_std.has_value());
  EXPECT_EQ(*three.fr_std, 0.0);
  EXPECT_EQ(*three.dc_std, 0.0);
  EXPECT_THROW(evaluate(*store_, *queries_, RetrievalConfig{}, 0), Error);
}

// ---------------------------------------------------------------------------
// Latency

TEST(Latency, Percentiles) {
  const auto one = summarize_latencies({3.5});
  EXPECT_EQ(one.mean_ms, 3.5);
  EXPECT_EQ(one.p50_ms, 3.5);
  EXPECT_EQ(one.p95_ms, 3.5);
  EXPECT_EQ(one.p99_ms, 3.5);
  std::vector<double> hundred;
  for (int i = 100; i >= 1; --i) hundred.push_back(i);
  const auto s = summarize_latencies(hundred);
  EXPECT_EQ(s.mean_ms, 50.5);
  EXPECT_EQ(s.p50_ms, 50);
  EXPECT_EQ(s.p95_ms, 95);
  EXPECT_EQ(s.p99_ms, 99);
  const auto ten = summarize_latencies({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  EXPECT_EQ(ten.p50_ms, 5);
  EXPECT_EQ(ten.p95_ms, 10);
}

TEST_F(EvalCorpus, BenchStagesAddUp) {
  const auto r = latency_bench(*store_, *queries_, RetrievalConfig{}, 5, 50);
  EXPECT_EQ(r.queries, 50u);
  EXPECT_EQ(r.store_size, store_->size());
  EXPECT_NEAR(r.total.mean_ms, r.dense.mean_ms + r.symbolic.mean_ms + r.fusion.mean_ms, 1e-6);
  for (const auto* s : {&r.dense, &r.symbolic, &r.fusion, &r.total}) {
    EXPECT_GE(s->mean_ms, 0.0);
    EXPECT_LE(s->p50_ms, s->p95_ms);
    EXPECT_LE(s->p95_ms, s->p99_ms);
  }
  EXPECT_GE(r.total.p99_ms, r.dense.p50_ms);
  const auto single = latency_bench(*store_, *queries_, RetrievalConfig{}, 0, 1);
  EXPECT_EQ(single.total.mean_ms, single.total.p99_ms);
  EXPECT_THROW(latency_bench(*store_, std::vector<Query>{}, RetrievalConfig{}, 0, 1), Error);
}

// ---------------------------------------------------------------------------
// Tuner

TEST(Tuner, GridShape) {
  const auto g = simplex_grid(TuneOptions{});
  for (const auto& w : g) {
    EXPECT_TRUE(w.valid());
    EXPECT_GE(w.lambda_s, 0.4 - 1e-9);
    EXPECT_LE(w.lambda_s, 0.9 + 1e-9);
  }
  // lambda_s in 0.40..0.90 (11 values), lambda_e from 0 up to 1 - lambda_s.
  std::size_t expected = 0;
  for (int s = 8; s <= 18; ++s) expected += static_cast<std::size_t>(20 - s + 1);
  EXPECT_EQ(g.size(), expected);
  EXPECT_THROW(simplex_grid({0.0, 0.4, 0.9}), Error);
}

MemoryStore basis_store(std::size_t n, std::vector<Query>& queries) {
  MemoryStore store(n);
  for (std::size_t i = 0; i < n; ++i) store.add(testing::make_entry("b", 0, static_cast<std::int64_t>(i), "t", testing::basis(n, i)));
  for (std::size_t i = 0; i < n; ++i) {
    Query q;
    q.embedding.values = testing::basis(n, i);
    q.gold = GoldInfo{{i}, "", std::nullopt};
    queries.push_back(q);
  }
  return store;
}

TEST(Tuner, SinglePointGrid) {
  std::vector<Query> qs;
  const auto store = basis_store(4, qs);
  const auto r = tune_weights(store, qs, RetrievalConfig{}, {1.0, 1.0, 1.0});
  ASSERT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.best, (FusionWeights{1.0, 0.0, 0.0}));
  EXPECT_EQ(r.best_fr, 1.0);
}

TEST(Tuner, CosineSolvableTiesResolveToLargestSimilarityWeight) {
  std::vector<Query> qs;
  const auto store = basis_store(6, qs);
  RetrievalConfig base;
  base.k = 1;
  const auto r = tune_weights(store, qs, base);
  for (const auto& p : r.table) EXPECT_EQ(p.fr, 1.0);
  EXPECT_NEAR(r.best.lambda_s, 0.9, 1e-9);
  EXPECT_NEAR(r.best.lambda_e, 0.1, 1e-9);
  EXPECT_NEAR(r.best.lambda_c, 0.0, 1e-9);
}

// The gold turn shares both query entities but no direction; the distractor
// sits on the query direction, shares the discourse label and the rarer
// entity. Gold wins iff lambda_e * (2 - b) > 1 with
// b = ln 3 / (ln 21 + ln 3), i.e. only once lambda_e reaches 0.6.
TEST(Tuner, EntityDominatedFixture) {
  MemoryStore store(4);
  auto gold = testing::make_entry("f", 0, 0, "gold", testing::basis(4, 1));
  gold.entities = {mention("Ann", "A"), mention("Bob", "B")};
  auto distractor = testing::make_entry("f", 0, 1, "distractor", testing::basis(4, 0));
  distractor.entities = {mention("Bob", "B")};
  distractor.discourse = {DiscourseLabel::parse("CAUSE")};
  std::vector<MemoryEntry> batch{gold, distractor};
  for (int i = 0; i < 19; ++i) {
    auto filler = testing::make_entry("f", 1, i, "filler", testing::basis(4, 2));
    filler.entities = {mention("Ann", "A")};
    batch.push_back(filler);
  }
  store.add_all(batch);
  ASSERT_EQ(store.symbolic().cluster_size("A"), 20u);
  ASSERT_EQ(store.symbolic().cluster_size("B"), 2u);

  Query q;
  q.embedding.values = testing::basis(4, 0);
  q.entities = {mention("Ann", "A"), mention("Bob", "B")};
  q.discourse = {DiscourseLabel::parse("CAUSE")};
  q.gold = GoldInfo{{0}, "", std::nullopt};
  const std::vector<Query> qs{q};
  RetrievalConfig base;
  base.k = 1;
  const auto r = tune_weights(store, qs, base);
  EXPECT_NEAR(r.best.lambda_s, 0.4, 1e-9);
  EXPECT_NEAR(r.best.lambda_e, 0.6, 1e-9);
  EXPECT_NEAR(r.best.lambda_c, 0.0, 1e-9);
  EXPECT_EQ(r.best_fr, 1.0);

  // Independent sweep through the full retrieval path.
  const double b = std::log(3.0) / (std::log(21.0) + std::log(3.0));
  for (const auto& p : r.table) {
    auto cfg = base;
    cfg.weights = p.weights;
    EXPECT_EQ(p.fr, eval_fr(store, qs, cfg).fr);
    EXPECT_EQ(p.fr == 1.0, p.weights.lambda_e * (2 - b) > 1.0);
  }
}

TEST_F(EvalCorpus, TunerTableMatchesDirectEvaluation) {
  TuneOptions opts;
  opts.grid_step = 0.1;
  const auto r = tune_weights(*store_, *queries_, RetrievalConfig{}, opts);
  double best = -1;
  for (const auto& p : r.table) {
    RetrievalConfig cfg;
    cfg.weights = p.weights;
    EXPECT_EQ(p.fr, eval_fr(*store_, *queries_, cfg).fr);
    best = std::max(best, p.fr);
  }
  EXPECT_EQ(r.best_fr, best);
}

}  // namespace
}  // namespace lingmem
