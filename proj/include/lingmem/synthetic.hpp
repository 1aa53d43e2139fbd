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

#pragma once

// Deterministic synthetic multi-session corpus with gold queries, annotated
// and embedded with the toy pipeline. Three query classes:
//
//   lexical    the gold turn is the closest paraphrase of the query.
//   entity     the query names its subject only by pronoun; paraphrase
//              distractors sit closer in embedding space than the gold.
//   discourse  the query opens with a contrast cue shared only with the
//              gold; expansion-style paraphrases sit closer than the gold.
//
// Coreference ids are prefixed with the dialogue id, so two dialogues that
// happen to draw the same name hold different clusters.

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <string>
#include <vector>

#include "lingmem/annotation.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/toy_annotator.hpp"
#include "lingmem/util.hpp"

namespace lingmem {

struct SyntheticSpec {
  std::size_t dialogues = 20;
  std::size_t sessions = 6;
  std::size_t filler_turns = 4;  // per session
  std::size_t lexical_queries = 1;
  std::size_t entity_queries = 1;
  std::size_t discourse_queries = 1;
  std::size_t distractors = 6;  // per entity or discourse query
  // Sessions between gold and query; 0 draws one per query.
  std::size_t gold_distance = 0;
  std::size_t dim = 256;
  std::uint64_t seed = 7;

  void validate() const {
    if (dialogues == 0) throw Error(ErrorCode::kInvalidArgument, "synthetic: dialogues must be > 0");
    if (sessions < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic: need at least 2 sessions");
    if (gold_distance >= sessions) {
      throw Error(ErrorCode::kInvalidArgument, "synthetic: gold_distance must be < sessions");
    }
    if (dim < kMinToyDim) throw Error(ErrorCode::kInvalidArgument, "synthetic: dim too small");
  }
};

namespace synth {

struct Person {
  const char* first;
  bool female;
};

inline const std::vector<Person>& first_names() {
  static const std::vector<Person> k = {
      {"Alice", true},  {"Maria", true},   {"Nadia", true},   {"Grace", true},
      {"Helen", true},  {"Priya", true},   {"Laura", true},   {"Ingrid", true},
      {"Daniel", false}, {"Marcus", false}, {"Tomas", false}, {"Oliver", false},
      {"Victor", false}, {"Samuel", false}, {"Felix", false}, {"Hugo", false}};
  return k;
}

inline const std::vector<std::string>& last_names() {
  static const std::vector<std::string> k = {
      "Brennan", "Okafor", "Lindqvist", "Moreau", "Castillo", "Whitfield",
      "Kowalski", "Tanaka", "Ferreira", "Abernathy", "Novak", "Haddad"};
  return k;
}

inline const std::vector<std::string>& place_stems() {
  static const std::vector<std::string> k = {
      "Harbor", "Willow", "Granite", "Maple", "Kingsley", "Rosewood",
      "Bayview", "Northgate", "Elm", "Cedar", "Lakeside", "Ashford"};
  return k;
}

inline const std::vector<std::string>& place_suffixes() {
  static const std::vector<std::string> k = {"Hotel", "Lodge", "Inn"};
  return k;
}

inline const std::vector<std::string>& object_adjectives() {
  static const std::vector<std::string> k = {
      "airport", "river", "garden", "museum", "harbour", "mountain", "city",
      "wine", "cooking", "sunset", "island", "castle", "forest", "railway"};
  return k;
}

inline const std::vector<std::string>& object_nouns() {
  static const std::vector<std::string> k = {
      "taxi", "tour", "table", "cruise", "class", "shuttle", "transfer",
      "ticket", "lesson", "picnic", "dinner", "visit"};
  return k;
}

inline const std::vector<std::string>& slots() {
  static const std::vector<std::string> k = {"morning", "afternoon", "evening", "late", "early"};
  return k;
}

inline const std::vector<std::string>& entity_distractors() {
  static const std::vector<std::string> k = {
      "Can you confirm the time for the {obj} pickup?",
      "I need to confirm the time for the {obj} again.",
      "We should confirm the time for the {obj} soon.",
      "Did anyone confirm the time for the {obj} yet?",
      "Please confirm the time for the {obj} by email.",
      "Could you confirm the time for the {obj} today?",
      "Would you confirm the time for the {obj} later?",
      "Should we confirm the time for the {obj} tonight?"};
  return k;
}

inline const std::vector<std::string>& discourse_distractors() {
  static const std::vector<std::string> k = {
      "I wonder what happened to the {obj} booking {ref} today.",
      "Can you check what happened to the {obj} booking {ref} please?",
      "We asked what happened to the {obj} booking {ref} last week.",
      "Please find out what happened to the {obj} booking {ref}.",
      "I still wonder what happened to the {obj} booking {ref}.",
      "Could you see what happened to the {obj} booking {ref} now?",
      "We need to know what happened to the {obj} booking {ref}.",
      "Did you hear what happened to the {obj} booking {ref}?"};
  return k;
}

inline const std::vector<std::string>& fillers() {
  static const std::vector<std::string> k = {
      "Hello, I would like some help with my plans.",
      "Sure, happy to help with that.",
      "I am staying at the {place} this week.",
      "The weather looks fine for the weekend.",
      "{other} will join the trip later.",
      "Thanks, that is all for now.",
      "Is breakfast included at the {place}?",
      "My sister might visit on the weekend.",
      "{other} prefers a quiet room at the {place}.",
      "We can sort out the details tomorrow.",
      "{person} asked about parking near the {place}.",
      "Great, noted."};
  return k;
}

inline std::string fill(std::string s, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + value.size())) {
    s.replace(pos, token.size(), value);
  }
  return s;
}

inline std::string iso_time(std::int64_t epoch_seconds) {
  const auto t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Planned {
  std::string text;
  Json meta = Json::object();
  int gold_for = -1;   // index of the query this turn supports
  int query = -1;      // index into the dialogue's queries
};

struct PlannedQuery {
  std::string klass;
  std::size_t gold_session = 0;
  std::size_t query_session = 0;
  std::string answer_span;
};

}  // namespace synth

inline Corpus make_synthetic(const SyntheticSpec& spec) {
  using namespace synth;
  spec.validate();
  Corpus corpus;
  // Per-query bookkeeping resolved once ids are assigned.
  struct Link {
    std::size_t dialogue, query_session, query_turn, gold_session, gold_turn;
  };
  std::vector<Link> links;
  const std::int64_t base_epoch = 1709283600;  // 2024-03-01T09:00:00Z

  for (std::size_t d = 0; d < spec.dialogues; ++d) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "syn-%04zu", d);
    const std::string dialogue_id = idbuf;
    Rng rng(spec.seed, dialogue_id);

    const auto& person = rng.pick(first_names());
    const std::string protagonist = std::string(person.first) + " " + rng.pick(last_names());
    std::string other;
    do {
      other = std::string(rng.pick(first_names()).first) + " " + rng.pick(last_names());
    } while (other == protagonist);
    const std::string place = rng.pick(place_stems()) + " " + rng.pick(place_suffixes());
    const std::string pronoun = person.female ? "she" : "he";

    std::vector<std::vector<Planned>> plan(spec.sessions);
    for (auto& session : plan) {
      for (std::size_t f = 0; f < spec.filler_turns; ++f) {
        std::string text = rng.pick(fillers());
        text = fill(fill(fill(text, "place", place), "other", other), "person", protagonist);
        session.push_back({text});
      }
    }
    auto insert_random = [&](std::size_t s, Planned p) {
      auto& session = plan[s];
      const auto pos = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(session.size())));
      session.insert(session.begin() + static_cast<std::ptrdiff_t>(pos), std::move(p));
    };

    std::vector<std::string> classes;
    classes.insert(classes.end(), spec.lexical_queries, "lexical");
    classes.insert(classes.end(), spec.entity_queries, "entity");
    classes.insert(classes.end(), spec.discourse_queries, "discourse");

    std::vector<std::string> used_objects;
    std::vector<int> used_refs;
    std::vector<PlannedQuery> queries;
    std::vector<std::vector<Planned>> blocks;  // appended to the query session
    for (std::size_t qi = 0; qi < classes.size(); ++qi) {
      std::string obj;
      do {
        obj = rng.pick(object_adjectives()) + " " + rng.pick(object_nouns());
      } while (std::find(used_objects.begin(), used_objects.end(), obj) != used_objects.end());
      used_objects.push_back(obj);
      int ref;
      do {
        ref = static_cast<int>(rng.uniform_int(1000, 9999));
      } while (std::find(used_refs.begin(), used_refs.end(), ref) != used_refs.end());
      used_refs.push_back(ref);
      const std::string refs = std::to_string(ref);

      PlannedQuery pq;
      pq.klass = classes[qi];
      const std::size_t distance =
          spec.gold_distance ? spec.gold_distance
                             : static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(spec.sessions) - 1));
      pq.gold_session = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(spec.sessions - 1 - distance)));
      pq.query_session = pq.gold_session + distance;

      Planned gold, query;
      std::vector<Planned> block;
      std::vector<std::string> distractor_pool;
      if (pq.klass == "lexical") {
        const std::string price = std::to_string(rng.uniform_int(40, 400));
        gold.text = "The " + obj + " for booking " + refs + " costs " + price + " pounds in total.";
        query.text = "How much does the " + obj + " for booking " + refs + " cost in total?";
        pq.answer_span = "costs " + price + " pounds";
      } else if (pq.klass == "entity") {
        const std::string when = std::to_string(rng.uniform_int(7, 11)) + ":" +
                                 std::to_string(rng.uniform_int(1, 5)) + "0";
        gold.text = protagonist + " confirmed the " + obj + " for " + when + ".";
        query.text = "Did " + pronoun + " confirm the time for the " + obj + "?";
        pq.answer_span = "confirmed the " + obj + " for " + when;
        block.push_back({protagonist + " called the front desk earlier."});
        distractor_pool = entity_distractors();
      } else {
        const std::string slot = rng.pick(slots());
        gold.text = "But the " + obj + " booking " + refs + " moved to the " + slot + " slot.";
        query.text = "But what happened to the " + obj + " booking " + refs + "?";
        pq.answer_span = "moved to the " + slot + " slot";
        distractor_pool = discourse_distractors();
      }
      gold.meta["relation_evidence"] = true;
      gold.gold_for = static_cast<int>(qi);
      insert_random(pq.gold_session, gold);

      rng.shuffle(distractor_pool);
      for (std::size_t k = 0; k < spec.distractors && !distractor_pool.empty(); ++k) {
        const std::string text =
            fill(fill(distractor_pool[k % distractor_pool.size()], "obj", obj), "ref", refs);
        const auto s = static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(pq.gold_session), static_cast<std::int64_t>(pq.query_session)));
        insert_random(s, {text});
      }
      query.meta["query_class"] = pq.klass;
      query.query = static_cast<int>(qi);
      block.push_back(query);
      blocks.push_back(std::move(block));
      queries.push_back(pq);
    }
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      auto& session = plan[queries[qi].query_session];
      session.insert(session.end(), blocks[qi].begin(), blocks[qi].end());
    }

    // Annotate and embed in dialogue order.
    AnnotatedDialogue dialogue;
    dialogue.dialogue_id = dialogue_id;
    dialogue.metadata["generator"] = "synthetic";
    std::vector<MemoryEntry> history;
    std::int64_t clock = base_epoch + static_cast<std::int64_t>(d) * 86400;
    std::int64_t turn_id = 0;
    std::vector<std::pair<std::size_t, std::size_t>> gold_pos(queries.size()), query_pos(queries.size());
    for (std::size_t s = 0; s < plan.size(); ++s) {
      Session session;
      session.session_id = static_cast<std::int64_t>(s);
      if (s > 0) {
        const std::vector<std::int64_t> gaps{12, 36, 72};
        const auto hours = rng.pick(gaps);
        clock += hours * 3600;
        session.gap_tag = make_gap_tag(hours);
      }
      for (std::size_t t = 0; t < plan[s].size(); ++t) {
        const auto& p = plan[s][t];
        AnnotatedTurn turn;
        auto& e = turn.entry;
        e.utterance = p.text;
        e.speaker = (turn_id % 2 == 0) ? "user" : "agent";
        e.timestamp = iso_time(clock);
        e.dialogue_id = dialogue_id;
        e.session_id = session.session_id;
        e.turn_id = turn_id++;
        auto ann = toy_annotate(e.utterance, history, dialogue_id + ":");
        e.entities = std::move(ann.entities);
        e.dep_triples = std::move(ann.dep_triples);
        e.discourse = std::move(ann.discourse);
        e.embedding = toy_embed(e.utterance, spec.dim);
        turn.meta = p.meta;
        if (t + 1 == plan[s].size()) turn.meta["goal_complete"] = true;
        if (p.gold_for >= 0) gold_pos[static_cast<std::size_t>(p.gold_for)] = {s, t};
        if (p.query >= 0) {
          query_pos[static_cast<std::size_t>(p.query)] = {s, t};
          turn.gold = GoldInfo{};
          turn.gold->answer_span = queries[static_cast<std::size_t>(p.query)].answer_span;
        }
        history.push_back(e);
        session.turns.push_back(std::move(turn));
        clock += 120;
      }
      dialogue.sessions.push_back(std::move(session));
    }

    // Gold cluster assignments for the names the dialogue uses.
    std::map<std::string, std::string> assignments;
    for (const auto& e : history) {
      for (const auto& m : e.entities) {
        if (m.name == protagonist || m.name == other || m.name == place) assignments[m.name] = m.coref_id;
      }
    }
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      dialogue.sessions[query_pos[qi].first].turns[query_pos[qi].second].gold->coref_assignments = assignments;
      links.push_back({d, query_pos[qi].first, query_pos[qi].second, gold_pos[qi].first, gold_pos[qi].second});
    }
    corpus.push_back(std::move(dialogue));
  }

  assign_entry_ids(corpus);
  for (const auto& l : links) {
    auto& dialogue = corpus[l.dialogue];
    const EntryId gold_id = dialogue.sessions[l.gold_session].turns[l.gold_turn].entry.id;
    dialogue.sessions[l.query_session].turns[l.query_turn].gold->supporting_entry_ids = {gold_id};
  }
  for (auto& d : corpus) {
    for (auto& s : d.sessions) {
      for (auto& t : s.turns) t.entry.id = kUnassignedId;
    }
  }
  return corpus;
}

}  // namespace lingmem
