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

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lingmem/lingmem.hpp"
#include "test_util.hpp"

namespace lingmem {
namespace {

// ---------------------------------------------------------------------------
// Toy annotator

TEST(ToyAnnotate, SingleName) {
  const auto a = toy_annotate("John booked a taxi.", {});
  ASSERT_EQ(a.entities.size(), 1u);
  EXPECT_EQ(a.entities[0].name, "John");
  EXPECT_EQ(a.entities[0].coref_id, "E1");
  EXPECT_EQ(a.entities[0].ner_type, "PERSON");
  EXPECT_EQ(a.entities[0].span, (CharSpan{0, 4}));
  ASSERT_EQ(a.discourse.size(), 1u);
  EXPECT_EQ(a.discourse[0].key(), "EXPANSION");
}

TEST(ToyAnnotate, PronounLinksToMostRecentPerson) {
  MemoryEntry john;
  john.utterance = "John booked a taxi.";
  john.entities = toy_annotate(john.utterance, {}).entities;
  const std::vector<MemoryEntry> history{john};
  const auto a = toy_annotate("He confirmed it.", history);
  ASSERT_EQ(a.entities.size(), 1u);  // "it" has no non-person antecedent
  EXPECT_EQ(a.entities[0].name, "He");
  EXPECT_EQ(a.entities[0].coref_id, john.entities[0].coref_id);
  EXPECT_EQ(a.entities[0].span, (CharSpan{0, 2}));
}

TEST(ToyAnnotate, RepeatedNameReusesCluster) {
  MemoryEntry first;
  first.utterance = "Maria Lopez called.";
  first.entities = toy_annotate(first.utterance, {}, "d7:").entities;
  ASSERT_EQ(first.entities.size(), 1u);
  EXPECT_EQ(first.entities[0].coref_id, "d7:E1");
  const std::vector<MemoryEntry> history{first};
  const auto a = toy_annotate("I met Maria Lopez at the Harbor Hotel.", history, "d7:");
  ASSERT_EQ(a.entities.size(), 2u);
  EXPECT_EQ(a.entities[0].coref_id, "d7:E1");
  EXPECT_EQ(a.entities[1].name, "Harbor Hotel");
  EXPECT_EQ(a.entities[1].ner_type, "LOC");
  EXPECT_EQ(a.entities[1].coref_id, "d7:E2");
}

TEST(ToyAnnotate, DiscourseCues) {
  EXPECT_EQ(toy_annotate("But the hotel was full.", {}).discourse[0].key(), "CONTRAST");
  EXPECT_EQ(toy_annotate("And then we left.", {}).discourse[0].key(), "ELABORATION");
  EXPECT_EQ(toy_annotate("Because it rained.", {}).discourse[0].key(), "CAUSE");
  EXPECT_EQ(toy_annotate("the hotel was full", {}).discourse[0].key(), "EXPANSION");
}

TEST(ToyAnnotate, TitleStaysWithName) {
  const auto a = toy_annotate("Dr. Morales says MRI results show early-stage glioma.", {});
  ASSERT_GE(a.entities.size(), 1u);
  EXPECT_EQ(a.entities[0].name, "Dr. Morales");
  EXPECT_EQ(a.entities[0].ner_type, "PERSON");
}

TEST(ToyAnnotate, DepTriplesAreNormalizedAdjacentContentWords) {
  const auto a = toy_annotate("Book the Airport taxi now", {});
  ASSERT_EQ(a.dep_triples.size(), 2u);
  EXPECT_EQ(a.dep_triples[0], (DependencyTriple{"book", "next", "airport"}));
  EXPECT_EQ(a.dep_triples[1], (DependencyTriple{"airport", "next", "taxi"}));
}

TEST(ToyAnnotate, Pure) {
  const std::string text = "But Maria said he would call the Grand Hotel because of the storm.";
  const auto a = toy_annotate(text, {});
  const auto b = toy_annotate(text, {});
  EXPECT_EQ(a.entities, b.entities);
  EXPECT_EQ(a.dep_triples, b.dep_triples);
  EXPECT_EQ(a.discourse, b.discourse);
  EXPECT_EQ(toy_embed(text, 64), toy_embed(text, 64));
}

// Independent hashed bag-of-ngrams embedder used as the oracle.
std::vector<float> oracle_embed(const std::string& text, std::size_t dim) {
  auto fnv = [](const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  };
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text + " ") {
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  std::vector<double> counts(dim, 0.0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    counts[fnv(words[i]) % dim] += 1;
    if (i + 1 < words.size()) counts[fnv(words[i] + " " + words[i + 1]) % dim] += 1;
  }
  double norm = 0.0;
  for (double c : counts) norm += c * c;
  norm = std::sqrt(norm);
  std::vector<float> out;
  for (double c : counts) out.push_back(static_cast<float>(c / norm));
  return out;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

TEST(ToyEmbed, MatchesOracle) {
  for (const std::string text : {"book a taxi", "Book a taxi now!", "weather tomorrow", "MRI results: glioma"}) {
    const auto got = toy_embed(text, 64).values;
    const auto want = oracle_embed(text, 64);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-7) << text;
  }
}

TEST(ToyEmbed, IdenticalStringsHaveCosineOne) {
  const auto a = toy_embed("the taxi is at nine", 64);
  EXPECT_NEAR(dot(a.values, a.values), 1.0, 1e-6);
}

TEST(ToyEmbed, DisjointVocabularyIsOrthogonal) {
  const std::size_t dim = 1 << 16;
  const auto a = oracle_embed("alpha beta", dim);
  const auto b = oracle_embed("gamma delta", dim);
  ASSERT_EQ(cosine(a, b), 0.0);  // no bucket collisions at this size
  EXPECT_NEAR(dot(toy_embed("alpha beta", dim).values, toy_embed("gamma delta", dim).values), 0.0, 1e-9);
}

TEST(ToyEmbed, SharedWordsRaiseCosine) {
  const std::size_t dim = 256;
  const auto base = oracle_embed("book a taxi", dim);
  const double near = cosine(base, oracle_embed("book a taxi now", dim));
  const double far = cosine(base, oracle_embed("weather tomorrow", dim));
  ASSERT_GT(near, far);
  const auto t = toy_embed("book a taxi", dim).values;
  EXPECT_NEAR(dot(t, toy_embed("book a taxi now", dim).values), near, 1e-6);
  EXPECT_NEAR(dot(t, toy_embed("weather tomorrow", dim).values), far, 1e-6);
}

TEST(ToyEmbed, Errors) {
  EXPECT_THROW(toy_embed("", 64), Error);
  EXPECT_THROW(toy_embed("...", 64), Error);
  EXPECT_THROW(toy_embed("ok", 4), Error);
}

// ---------------------------------------------------------------------------
// Record ingest

Json record(const std::string& dialogue, int session, int turn, const std::string& text,
            std::optional<std::vector<float>> embedding) {
  Json j = {{"dialogue_id", dialogue},
            {"session_id", session},
            {"turn_id", turn},
            {"text", text},
            {"speaker", "user"},
            {"timestamp", "2024-03-14T09:10:00Z"}};
  if (embedding) j["embedding"] = *embedding;
  return j;
}

ReadResult read_text(const std::string& text, ReadOptions opts = {}) {
  std::istringstream in(text);
  return read_annotated(in, opts, "fixture");
}

TEST(ReadAnnotated, OneRecord) {
  const auto r = read_text(record("d1", 0, 0, "hi", std::vector<float>{0.6f, 0.8f}).dump() + "\n");
  ASSERT_EQ(r.dialogues.size(), 1u);
  ASSERT_EQ(r.dialogues[0].sessions.size(), 1u);
  ASSERT_EQ(r.dialogues[0].sessions[0].turns.size(), 1u);
  EXPECT_TRUE(r.rejected.empty());
  EXPECT_EQ(r.dim, 2u);
  EXPECT_TRUE(r.dialogues[0].sessions[0].turns[0].entry.entities.empty());
}

TEST(ReadAnnotated, EmptyInput) {
  const auto r = read_text("");
  EXPECT_TRUE(r.dialogues.empty());
  EXPECT_EQ(r.records, 0u);
}

TEST(ReadAnnotated, MissingEmbedding) {
  const std::string line = record("d1", 0, 0, "book a taxi", std::nullopt).dump();
  const auto rejected = read_text(line);
  ASSERT_EQ(rejected.rejected.size(), 1u);
  EXPECT_EQ(rejected.rejected[0].line, 1u);
  EXPECT_TRUE(rejected.dialogues.empty());

  ReadOptions toy;
  toy.toy_embed = true;
  toy.toy_dim = 32;
  const auto r = read_text(line, toy);
  ASSERT_TRUE(r.rejected.empty());
  EXPECT_EQ(r.dialogues[0].sessions[0].turns[0].entry.embedding, toy_embed("book a taxi", 32));
}

TEST(ReadAnnotated, UnnormalizedEmbeddingIsNormalized) {
  const auto r = read_text(record("d1", 0, 0, "x", std::vector<float>{3.0f, 4.0f}).dump());
  ASSERT_TRUE(r.rejected.empty());
  const auto& v = r.dialogues[0].sessions[0].turns[0].entry.embedding.values;
  EXPECT_NEAR(v[0], 0.6, 1e-7);
  EXPECT_NEAR(v[1], 0.8, 1e-7);
}

TEST(ReadAnnotated, ViolationsAreReportedPerLine) {
  std::string text = record("d1", 0, 0, "ok", std::vector<float>{1.0f, 0.0f}).dump() + "\n";
  Json bad = record("d1", 0, 1, "bad", std::vector<float>{0.0f, 0.0f});
  bad["dep_triples"] = Json::array({{{"head", "a:b"}, {"label", "x"}, {"child", "y"}}});
  text += bad.dump() + "\n";
  text += record("d1", 0, 2, "wrong dim", std::vector<float>{1.0f, 0.0f, 0.0f}).dump() + "\n";
  const auto r = read_text(text);
  ASSERT_EQ(r.rejected.size(), 2u);
  EXPECT_EQ(r.rejected[0].line, 2u);
  EXPECT_EQ(r.rejected[1].line, 3u);
  EXPECT_EQ(r.dialogues[0].turn_count(), 1u);
}

TEST(ReadAnnotated, MalformedAndDuplicateRecords) {
  try {
    read_text(record("d1", 0, 0, "ok", std::vector<float>{1.0f, 0.0f}).dump() + "\n{not json\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformed);
    EXPECT_NE(std::string(e.what()).find("fixture:2"), std::string::npos);
  }
  const std::string line = record("d1", 0, 0, "ok", std::vector<float>{1.0f, 0.0f}).dump() + "\n";
  try {
    read_text(line + line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicate);
  }
  Json no_text = record("d1", 0, 0, "ok", std::vector<float>{1.0f, 0.0f});
  no_text.erase("text");
  EXPECT_THROW(read_text(no_text.dump()), Error);
}

TEST(ReadAnnotated, OrderingWithinDialogue) {
  const std::string a = record("d1", 1, 0, "later", std::vector<float>{1.0f, 0.0f}).dump() + "\n";
  const std::string b = record("d1", 0, 0, "earlier", std::vector<float>{1.0f, 0.0f}).dump() + "\n";
  EXPECT_THROW(read_text(a + b), Error);
  const std::string c = record("d1", 0, 5, "x", std::vector<float>{1.0f, 0.0f}).dump() + "\n";
  const std::string d = record("d1", 0, 3, "y", std::vector<float>{1.0f, 0.0f}).dump() + "\n";
  EXPECT_THROW(read_text(c + d), Error);
}

TEST(ReadAnnotated, GoldAndGapTag) {
  Json q = record("d1", 1, 0, "what was booked?", std::vector<float>{0.0f, 1.0f});
  q["gold"] = {{"supporting_entry_ids", {0}}, {"answer_span", "a taxi"}, {"coref_assignments", {{"John", "E1"}}}};
  q["gap_tag"] = "<GAP=hours:36>";
  q["meta"] = {{"query_class", "entity"}};
  const auto r = read_text(record("d1", 0, 0, "John booked a taxi", std::vector<float>{1.0f, 0.0f}).dump() +
                           "\n" + q.dump() + "\n");
  ASSERT_TRUE(r.rejected.empty());
  ASSERT_EQ(r.dialogues[0].sessions.size(), 2u);
  EXPECT_EQ(r.dialogues[0].sessions[1].gap_tag, "<GAP=hours:36>");
  const auto queries = corpus_queries(r.dialogues);
  ASSERT_EQ(queries.size(), 1u);
  EXPECT_EQ(queries[0].query_class, "entity");
  EXPECT_EQ(queries[0].gold->supporting_entry_ids, std::vector<EntryId>{0});
  EXPECT_EQ(queries[0].gold->coref_assignments->at("John"), "E1");
  EXPECT_EQ(memory_entries(r.dialogues).size(), 1u);

  q["gap_tag"] = "36 hours";
  EXPECT_EQ(read_text(q.dump()).rejected.size(), 1u);
}

TEST(ReadAnnotated, RoundTripIsByteIdentical) {
  auto spec = testing::small_spec(4);
  const std::string first = write_annotated(make_synthetic(spec));
  const auto r = read_text(first);
  ASSERT_TRUE(r.rejected.empty());
  EXPECT_EQ(write_annotated(r.dialogues), first);
}

TEST(ReadAnnotated, CanonicalizesKeyOrderAndFloats) {
  // Same record with shuffled keys and a long float spelling.
  const std::string messy =
      R"({"text":"hi","turn_id":0,"timestamp":"t","speaker":"u","session_id":0,)"
      R"("embedding":[1.000000000000,0.0],"dialogue_id":"d"})";
  const auto r = read_text(messy);
  const std::string out = write_annotated(r.dialogues);
  EXPECT_EQ(out,
            R"({"dep_triples":[],"dialogue_id":"d","discourse":[],"embedding":[1,0],"entities":[],)"
            R"("session_id":0,"speaker":"u","text":"hi","timestamp":"t","turn_id":0})"
            "\n");
  EXPECT_EQ(write_annotated(read_text(out).dialogues), out);
}

TEST(ReadAnnotated, FileFixture) {
  const auto r = read_annotated(std::string(LINGMEM_TEST_DATA) + "/three_records.jsonl");
  EXPECT_TRUE(r.rejected.empty());
  EXPECT_EQ(memory_entries(r.dialogues).size(), 3u);
  EXPECT_THROW(read_annotated(std::string(LINGMEM_TEST_DATA) + "/does_not_exist.jsonl"), Error);
}

TEST(Corpus, EntryIdConvention) {
  auto corpus = make_synthetic(testing::small_spec(2));
  const EntryId next = assign_entry_ids(corpus, 10);
  EntryId expect = 10;
  for (const auto& d : corpus) {
    for (const auto& s : d.sessions) {
      for (const auto& t : s.turns) {
        if (t.is_query()) {
          EXPECT_EQ(t.entry.id, kUnassignedId);
        } else {
          EXPECT_EQ(t.entry.id, expect++);
        }
      }
    }
  }
  EXPECT_EQ(next, expect);
}

}  // namespace
}  // namespace lingmem
