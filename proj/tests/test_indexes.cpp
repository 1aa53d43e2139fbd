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

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "lingmem/lingmem.hpp"
#include "test_util.hpp"

namespace lingmem {
namespace {

using testing::random_unit;

Embedding emb(std::vector<float> v) { return Embedding{std::move(v)}; }

// ---------------------------------------------------------------------------
// Dense index

TEST(DenseIndex, SingleVector) {
  DenseIndex idx(16);
  std::mt19937_64 gen(1);
  const auto v = random_unit(gen, 16);
  idx.insert(7, emb(v));
  const auto hits = idx.search(v, 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].id, 7u);
  EXPECT_NEAR(hits[0].cosine, 1.0, 1e-6);
}

TEST(DenseIndex, Errors) {
  DenseIndex idx(4);
  EXPECT_THROW(idx.search(testing::basis(4, 0), 1), Error);  // empty
  idx.insert(1, emb(testing::basis(4, 0)));
  try {
    idx.insert(1, emb(testing::basis(4, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicate);
  }
  try {
    idx.insert(2, emb(testing::basis(3, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
  EXPECT_THROW(idx.search(testing::basis(3, 0), 1), Error);
  HnswParams bad;
  bad.m = 1;
  EXPECT_THROW(DenseIndex(4, bad), Error);
}

TEST(DenseIndex, EveryStoredVectorFindsItself) {
  const std::size_t dim = 32;
  DenseIndex idx(dim, testing::small_hnsw());
  std::mt19937_64 gen(2);
  std::vector<std::vector<float>> vs;
  for (EntryId i = 0; i < 1000; ++i) {
    vs.push_back(random_unit(gen, dim));
    idx.insert(i, emb(vs.back()));
  }
  for (EntryId i = 0; i < 1000; ++i) {
    const auto exact = idx.search_exact(vs[i], 1);
    ASSERT_EQ(exact[0].id, i);  // oracle agrees the vector is its own nearest
    const auto hits = idx.search(vs[i], 1);
    EXPECT_EQ(hits[0].id, i);
    EXPECT_NEAR(hits[0].cosine, 1.0, 1e-6);
  }
}

TEST(DenseIndex, OrthogonalQueryTiesBreakById) {
  const std::size_t dim = 64;
  DenseIndex idx(dim);
  for (EntryId i : {5u, 3u, 9u, 1u, 7u}) idx.insert(i, emb(testing::basis(dim, i)));
  const auto q = testing::basis(dim, 63);
  for (const auto& hits : {idx.search(q, 5), idx.search_exact(q, 5)}) {
    ASSERT_EQ(hits.size(), 5u);
    std::vector<EntryId> ids;
    for (const auto& h : hits) {
      EXPECT_NEAR(h.cosine, 0.0, 1e-12);
      ids.push_back(h.id);
    }
    EXPECT_EQ(ids, (std::vector<EntryId>{1, 3, 5, 7, 9}));
  }
}

TEST(DenseIndex, WideBeamEqualsExactSearch) {
  const std::size_t dim = 16, n = 1500;
  DenseIndex idx(dim, testing::small_hnsw());
  std::mt19937_64 gen(3);
  for (EntryId i = 0; i < n; ++i) idx.insert(i, emb(random_unit(gen, dim)));
  for (int q = 0; q < 25; ++q) {
    const auto query = random_unit(gen, dim);
    EXPECT_EQ(idx.search(query, 20, nullptr, n), idx.search_exact(query, 20));
  }
}

TEST(DenseIndex, CosineMatchesDirectFormula) {
  const std::size_t dim = 24;
  DenseIndex idx(dim);
  std::mt19937_64 gen(4);
  std::map<EntryId, std::vector<float>> stored;
  for (EntryId i = 0; i < 50; ++i) {
    stored[i] = random_unit(gen, dim);
    idx.insert(i, emb(stored[i]));
  }
  const auto q = random_unit(gen, dim);
  for (const auto& h : idx.search_exact(q, 50)) {
    const auto& v = stored[h.id];
    double num = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      num += static_cast<double>(q[k]) * v[k];
      na += static_cast<double>(q[k]) * q[k];
      nb += static_cast<double>(v[k]) * v[k];
    }
    EXPECT_NEAR(h.cosine, num / std::sqrt(na * nb), 1e-6);
    EXPECT_NEAR(h.cosine, dot(q, v), 1e-9);
  }
}

TEST(DenseIndex, RecallAgainstExhaustiveScan) {
  const std::size_t dim = 32, n = 3000;
  DenseIndex idx(dim);
  std::mt19937_64 gen(5);
  for (EntryId i = 0; i < n; ++i) idx.insert(i, emb(random_unit(gen, dim)));
  std::size_t found = 0;
  for (int q = 0; q < 50; ++q) {
    const auto query = random_unit(gen, dim);
    std::set<EntryId> truth;
    for (const auto& h : idx.search_exact(query, 10)) truth.insert(h.id);
    for (const auto& h : idx.search(query, 10)) found += truth.count(h.id);
  }
  EXPECT_GE(static_cast<double>(found) / 500.0, 0.95);
}

TEST(DenseIndex, TombstoneAndRebuild) {
  const std::size_t dim = 8;
  DenseIndex idx(dim, testing::small_hnsw());
  std::mt19937_64 gen(6);
  std::vector<std::vector<float>> vs;
  for (EntryId i = 0; i < 200; ++i) {
    vs.push_back(random_unit(gen, dim));
    idx.insert(i, emb(vs.back()));
  }
  EXPECT_TRUE(idx.remove(10));
  EXPECT_FALSE(idx.remove(10));
  EXPECT_FALSE(idx.remove(999));
  EXPECT_EQ(idx.size(), 199u);
  EXPECT_FALSE(idx.contains(10));
  for (const auto& h : idx.search(vs[10], 199, nullptr, 400)) EXPECT_NE(h.id, 10u);
  idx.rebuild();
  EXPECT_EQ(idx.size(), 199u);
  EXPECT_EQ(idx.search(vs[10], 10, nullptr, 400), idx.search_exact(vs[10], 10));
  EXPECT_THROW(idx.insert(11, emb(vs[11])), Error);
  idx.insert(10, emb(vs[10]));  // id is free again after compaction
  EXPECT_EQ(idx.search(vs[10], 1)[0].id, 10u);
}

TEST(DenseIndex, SerializeRoundTripAndCorruption) {
  const std::size_t dim = 12;
  DenseIndex idx(dim, testing::small_hnsw());
  std::mt19937_64 gen(7);
  for (EntryId i = 0; i < 300; ++i) idx.insert(i * 3, emb(random_unit(gen, dim)));
  idx.remove(9);
  const auto bytes = idx.serialize();
  const auto copy = DenseIndex::deserialize(bytes, "dense");
  EXPECT_EQ(copy.size(), idx.size());
  EXPECT_EQ(copy.serialize(), bytes);
  for (int q = 0; q < 20; ++q) {
    const auto query = random_unit(gen, dim);
    EXPECT_EQ(copy.search(query, 10), idx.search(query, 10));
  }
  for (std::size_t pos : {std::size_t{0}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x01;
    try {
      DenseIndex::deserialize(bad, "dense");
      FAIL() << pos;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCorruption);
    }
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() / 3);
  EXPECT_THROW(DenseIndex::deserialize(truncated, "dense"), Error);
}

TEST(DenseIndex, LevelsAreDeterministic) {
  const std::size_t dim = 8;
  DenseIndex a(dim, testing::small_hnsw()), b(dim, testing::small_hnsw());
  std::mt19937_64 ga(8), gb(8);
  for (EntryId i = 0; i < 300; ++i) {
    a.insert(i, emb(random_unit(ga, dim)));
    b.insert(i, emb(random_unit(gb, dim)));
  }
  EXPECT_EQ(a.serialize(), b.serialize());
}

// Mean distance evaluations per query must grow far slower than N.
TEST(DenseIndex, VisitedNodesGrowSublinearly) {
  HnswParams p;
  p.m = 8;
  p.ef_construction = 32;
  p.ef_search = 32;
  const std::size_t dim = 8;
  auto mean_visits = [&](std::size_t n) {
    DenseIndex idx(dim, p);
    std::mt19937_64 gen(9);
    for (EntryId i = 0; i < n; ++i) idx.insert(i, emb(random_unit(gen, dim)));
    double total = 0;
    for (int q = 0; q < 200; ++q) {
      SearchStats stats;
      idx.search(random_unit(gen, dim), 10, &stats);
      total += static_cast<double>(stats.distance_evals);
    }
    return total / 200.0;
  };
  const double small = mean_visits(10000);
  const double large = mean_visits(100000);
  EXPECT_LT(large, 10.0 * small);
}

// ---------------------------------------------------------------------------
// Symbolic index

MemoryEntry sym_entry(EntryId id) {
  MemoryEntry e;
  e.id = id;
  e.utterance = "x";
  return e;
}

TEST(SymbolicIndex, KeysForEntityAndTriple) {
  SymbolicIndex idx;
  auto e = sym_entry(4);
  e.entities.push_back(testing::mention("John Smith", "E17"));
  e.dep_triples.push_back(DependencyTriple::normalized("confirm", "nsubj", "John"));
  idx.insert(e);
  EXPECT_EQ(idx.postings("coref:E17"), std::vector<EntryId>{4});
  EXPECT_EQ(idx.postings("name:john smith"), std::vector<EntryId>{4});
  EXPECT_EQ(idx.postings("dep:confirm:nsubj:john"), std::vector<EntryId>{4});
}

TEST(SymbolicIndex, FeaturelessEntryOnlyRegistered) {
  SymbolicIndex idx;
  idx.insert(sym_entry(1));
  EXPECT_TRUE(idx.contains(1));
  EXPECT_EQ(idx.key_count(), 0u);
  EXPECT_THROW(idx.insert(sym_entry(1)), Error);
}

TEST(SymbolicIndex, Candidates) {
  SymbolicIndex idx;
  auto a = sym_entry(0);
  a.entities.push_back(testing::mention("John", "E17"));
  idx.insert(a);
  auto b = sym_entry(1);
  b.discourse.push_back(DiscourseLabel::parse("ELABORATION"));
  idx.insert(b);

  Query q;
  q.entities.push_back(testing::mention("he", "E17"));
  EXPECT_EQ(idx.candidates(q, 10), std::vector<EntryId>{0});
  EXPECT_TRUE(idx.candidates(Query{}, 10).empty());
  EXPECT_TRUE(idx.candidates(q, 0).empty());
}

TEST(SymbolicIndex, CapKeepsLowestIds) {
  SymbolicIndex idx;
  for (EntryId id : {12u, 5u}) {
    auto e = sym_entry(id);
    e.discourse.push_back(DiscourseLabel::parse("ELABORATION"));
    idx.insert(e);
  }
  Query q;
  q.discourse.push_back(DiscourseLabel::parse("elaboration"));
  EXPECT_EQ(idx.candidates(q, 1), std::vector<EntryId>{5});
  EXPECT_EQ(idx.candidates(q, 5), (std::vector<EntryId>{5, 12}));
}

TEST(SymbolicIndex, RarestKeysFillThePoolFirst) {
  SymbolicIndex idx;
  for (EntryId id = 0; id < 6; ++id) {
    auto e = sym_entry(id);
    e.discourse.push_back(DiscourseLabel::parse("ELABORATION"));
    if (id == 4) e.entities.push_back(testing::mention("Ann", "E9"));
    idx.insert(e);
  }
  Query q;
  q.discourse.push_back(DiscourseLabel::parse("ELABORATION"));
  q.entities.push_back(testing::mention("Ann", "E9"));
  // coref:E9 and name:ann (one posting each) come before the six-entry label.
  EXPECT_EQ(idx.candidates(q, 2), (std::vector<EntryId>{0, 4}));
  EXPECT_EQ(idx.candidates(q, 1), std::vector<EntryId>{4});
}

TEST(SymbolicIndex, ClusterSizes) {
  const auto rr = read_annotated(std::string(LINGMEM_TEST_DATA) + "/clusters.jsonl");
  ASSERT_TRUE(rr.rejected.empty());
  Corpus corpus = rr.dialogues;
  assign_entry_ids(corpus);
  SymbolicIndex idx;
  std::map<std::string, std::size_t> recount;
  for (const auto& e : memory_entries(corpus)) {
    idx.insert(e);
    for (const auto& m : e.entities) ++recount[m.coref_id];
  }
  EXPECT_EQ(idx.cluster_size("E404"), 0u);
  EXPECT_EQ(idx.cluster_size("A"), 3u);  // once in each of three entries
  EXPECT_EQ(idx.cluster_size("B"), 2u);  // twice in one entry
  EXPECT_EQ(idx.cluster_size("B"), recount["B"]);
  EXPECT_EQ(idx.cluster_stats(), recount);
}

class SymbolicCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto corpus = make_synthetic(testing::small_spec(6));
    assign_entry_ids(corpus);
    entries_ = new std::vector<MemoryEntry>(memory_entries(corpus));
  }
  static void TearDownTestSuite() { delete entries_; }
  static std::vector<MemoryEntry>* entries_;
};
std::vector<MemoryEntry>* SymbolicCorpus::entries_ = nullptr;

TEST_F(SymbolicCorpus, CompleteAndSound) {
  SymbolicIndex idx;
  for (const auto& e : *entries_) idx.insert(e);
  const std::size_t cap = entries_->size();
  for (const auto& e : *entries_) {
    std::vector<Query> probes;
    for (const auto& m : e.entities) {
      Query a, b;
      a.entities.push_back({"zz-no-such-name", m.coref_id, m.ner_type, std::nullopt});
      b.entities.push_back({m.name, "zz-no-such-id", m.ner_type, std::nullopt});
      probes.push_back(a);
      probes.push_back(b);
    }
    for (const auto& t : e.dep_triples) {
      Query q;
      q.dep_triples.push_back(t);
      probes.push_back(q);
    }
    for (const auto& l : e.discourse) {
      Query q;
      q.discourse.push_back(l);
      probes.push_back(q);
    }
    for (const auto& q : probes) {
      const auto got = idx.candidates(q, cap);
      EXPECT_TRUE(std::binary_search(got.begin(), got.end(), e.id)) << e.utterance;
      // Soundness: every id is in some posting list for the query's keys.
      std::set<EntryId> allowed;
      for (const auto& key : query_keys(q)) {
        for (EntryId id : idx.postings(key)) allowed.insert(id);
      }
      for (EntryId id : got) EXPECT_TRUE(allowed.count(id));
    }
  }
}

TEST_F(SymbolicCorpus, ClusterStatsMatchRecountInAnyOrder) {
  auto order = *entries_;
  std::mt19937_64 gen(10);
  std::shuffle(order.begin(), order.end(), gen);
  SymbolicIndex idx;
  std::map<std::string, std::size_t> recount;
  std::size_t mentions = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    idx.insert(order[i]);
    for (const auto& m : order[i].entities) {
      ++recount[m.coref_id];
      ++mentions;
    }
    if (i % 37 == 0 || i + 1 == order.size()) {
      ASSERT_EQ(idx.cluster_stats(), recount);
      ASSERT_EQ(idx.total_mentions(), mentions);
    }
  }
}

TEST_F(SymbolicCorpus, SerializeRoundTripAndCorruption) {
  SymbolicIndex idx;
  for (const auto& e : *entries_) idx.insert(e);
  const auto bytes = idx.serialize();
  const auto copy = SymbolicIndex::deserialize(bytes, "symbolic");
  EXPECT_EQ(copy.key_sizes(), idx.key_sizes());
  EXPECT_EQ(copy.cluster_stats(), idx.cluster_stats());
  EXPECT_EQ(copy.serialize(), bytes);
  auto bad = bytes;
  bad[bytes.size() / 2] ^= 0x40;
  try {
    SymbolicIndex::deserialize(bad, "symbolic");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruption);
  }
}

}  // namespace
}  // namespace lingmem
