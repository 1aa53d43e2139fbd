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

// Line-delimited annotated-utterance records: one canonical JSON object per
// utterance, grouped on read into dialogues and sessions.
//
// Record schema:
//   {dialogue_id, session_id, turn_id, speaker, timestamp, text,
//    gap_tag?, entities: [{name, coref_id, ner_type, span?: {start, end}}],
//    dep_triples: [{head, label, child}], discourse: [string],
//    embedding?: [float], gold?: {supporting_entry_ids, answer_span,
//    coref_assignments?}, meta?: {...}, dialogue_meta?: {...}}
//
// Records carrying `gold` are query turns and never become memory entries.
// Entry ids are assigned to the remaining records in file order, so gold
// ids in a corpus file refer to an ingest of that file into an empty store.

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lingmem/canonical_json.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/memory_model.hpp"
#include "lingmem/toy_annotator.hpp"

namespace lingmem {

struct AnnotatedTurn {
  MemoryEntry entry;
  std::optional<GoldInfo> gold;
  Json meta = Json::object();  // e.g. {"goal_complete": true}

  bool is_query() const { return gold.has_value(); }
  bool flag(const char* name) const {
    auto it = meta.find(name);
    return it != meta.end() && it->is_boolean() && it->get<bool>();
  }
};

struct Session {
  std::int64_t session_id = 0;
  std::optional<std::string> gap_tag;
  std::vector<AnnotatedTurn> turns;
};

struct AnnotatedDialogue {
  std::string dialogue_id;
  std::vector<Session> sessions;
  std::map<std::string, std::string> metadata;

  std::size_t turn_count() const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.turns.size();
    return n;
  }
};

using Corpus = std::vector<AnnotatedDialogue>;

inline bool valid_gap_tag(const std::string& tag) {
  static const std::regex kPattern("<GAP=hours:[0-9]+>");
  return std::regex_match(tag, kPattern);
}

inline std::string make_gap_tag(std::int64_t hours) {
  return "<GAP=hours:" + std::to_string(hours) + ">";
}

// ---------------------------------------------------------------------------
// JSON conversion

inline Json entity_to_json(const EntityMention& e) {
  Json j = {{"name", e.name}, {"coref_id", e.coref_id}, {"ner_type", e.ner_type}};
  if (e.span) j["span"] = {{"start", e.span->start}, {"end", e.span->end}};
  return j;
}

inline Json entities_to_json(const std::vector<EntityMention>& es) {
  Json arr = Json::array();
  for (const auto& e : es) arr.push_back(entity_to_json(e));
  return arr;
}

inline Json triples_to_json(const std::vector<DependencyTriple>& ts) {
  Json arr = Json::array();
  for (const auto& t : ts) arr.push_back({{"head", t.head}, {"label", t.label}, {"child", t.child}});
  return arr;
}

inline Json discourse_to_json(const std::vector<DiscourseLabel>& ls) {
  Json arr = Json::array();
  for (const auto& l : ls) arr.push_back(l.name());
  return arr;
}

inline Json embedding_to_json(const Embedding& e) {
  Json arr = Json::array();
  for (float x : e.values) arr.push_back(static_cast<double>(x));
  return arr;
}

inline Json gold_to_json(const GoldInfo& g) {
  Json j = {{"supporting_entry_ids", g.supporting_entry_ids}, {"answer_span", g.answer_span}};
  if (g.coref_assignments) j["coref_assignments"] = *g.coref_assignments;
  return j;
}

inline Json entry_to_json(const MemoryEntry& e) {
  Json j = {{"dialogue_id", e.dialogue_id},
            {"session_id", e.session_id},
            {"turn_id", e.turn_id},
            {"speaker", e.speaker},
            {"timestamp", e.timestamp},
            {"text", e.utterance},
            {"entities", entities_to_json(e.entities)},
            {"dep_triples", triples_to_json(e.dep_triples)},
            {"discourse", discourse_to_json(e.discourse)}};
  if (!e.embedding.values.empty()) j["embedding"] = embedding_to_json(e.embedding);
  if (e.id != kUnassignedId) j["id"] = e.id;
  return j;
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kMalformed, where + ": " + what);
}

template <typename T>
T required(const Json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) schema_error(where, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    schema_error(where, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T optional_field(const Json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    schema_error(where, std::string("field '") + key + "' has the wrong type");
  }
}

inline const Json& optional_array(const Json& j, const char* key, const std::string& where) {
  static const Json kEmpty = Json::array();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return kEmpty;
  if (!it->is_array()) schema_error(where, std::string("field '") + key + "' must be an array");
  return *it;
}

}  // namespace detail

inline std::vector<EntityMention> entities_from_json(const Json& arr, const std::string& where) {
  std::vector<EntityMention> out;
  for (const auto& ej : arr) {
    if (!ej.is_object()) detail::schema_error(where, "entity must be an object");
    EntityMention e;
    e.name = detail::required<std::string>(ej, "name", where);
    e.coref_id = detail::required<std::string>(ej, "coref_id", where);
    e.ner_type = detail::optional_field<std::string>(ej, "ner_type", "", where);
    if (auto it = ej.find("span"); it != ej.end() && !it->is_null()) {
      e.span = CharSpan{detail::required<std::size_t>(*it, "start", where),
                        detail::required<std::size_t>(*it, "end", where)};
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<DependencyTriple> triples_from_json(const Json& arr, const std::string& where) {
  std::vector<DependencyTriple> out;
  for (const auto& tj : arr) {
    if (!tj.is_object()) detail::schema_error(where, "dep triple must be an object");
    out.push_back(DependencyTriple::normalized(detail::required<std::string>(tj, "head", where),
                                               detail::required<std::string>(tj, "label", where),
                                               detail::required<std::string>(tj, "child", where)));
  }
  return out;
}

inline std::vector<DiscourseLabel> discourse_from_json(const Json& arr, const std::string& where) {
  std::vector<DiscourseLabel> out;
  for (const auto& lj : arr) {
    if (!lj.is_string()) detail::schema_error(where, "discourse label must be a string");
    out.push_back(DiscourseLabel::parse(lj.get<std::string>()));
  }
  return out;
}

inline std::optional<GoldInfo> gold_from_json(const Json& j, const std::string& where) {
  auto it = j.find("gold");
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_object()) detail::schema_error(where, "gold must be an object");
  GoldInfo g;
  g.supporting_entry_ids = detail::required<std::vector<EntryId>>(*it, "supporting_entry_ids", where);
  g.answer_span = detail::optional_field<std::string>(*it, "answer_span", "", where);
  if (auto ca = it->find("coref_assignments"); ca != it->end() && !ca->is_null()) {
    g.coref_assignments = detail::required<std::map<std::string, std::string>>(
        *it, "coref_assignments", where);
  }
  return g;
}

// Parses the entry fields of a record. The embedding is taken as given.
inline MemoryEntry entry_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) detail::schema_error(where, "record must be an object");
  MemoryEntry e;
  e.dialogue_id = detail::required<std::string>(j, "dialogue_id", where);
  e.session_id = detail::required<std::int64_t>(j, "session_id", where);
  e.turn_id = detail::required<std::int64_t>(j, "turn_id", where);
  e.speaker = detail::optional_field<std::string>(j, "speaker", "", where);
  e.timestamp = detail::optional_field<std::string>(j, "timestamp", "", where);
  e.utterance = detail::required<std::string>(j, "text", where);
  e.entities = entities_from_json(detail::optional_array(j, "entities", where), where);
  e.dep_triples = triples_from_json(detail::optional_array(j, "dep_triples", where), where);
  e.discourse = discourse_from_json(detail::optional_array(j, "discourse", where), where);
  if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
    e.embedding.values = detail::required<std::vector<float>>(j, "embedding", where);
  }
  e.id = detail::optional_field<EntryId>(j, "id", kUnassignedId, where);
  return e;
}

// ---------------------------------------------------------------------------
// Reading

struct ReadOptions {
  // 0 = take the dimensionality of the first embedded record (or of the
  // toy embedder when enabled).
  std::size_t dim = 0;
  // Synthesize missing embeddings with toy_embed. Off unless requested.
  bool toy_embed = false;
  std::size_t toy_dim = 64;
};

struct RejectedRecord {
  std::size_t line = 0;
  std::vector<std::string> violations;
};

struct ReadResult {
  Corpus dialogues;
  std::vector<RejectedRecord> rejected;
  std::size_t records = 0;
  std::size_t dim = 0;
};

namespace detail {

// Keeps bits of vectors that are already unit length so that reading a
// written file reproduces it exactly.
inline Embedding ingest_embedding(const std::vector<float>& raw, std::size_t dim) {
  if (raw.size() == dim) {
    bool finite = true;
    for (float x : raw) finite = finite && std::isfinite(x);
    if (finite && std::abs(l2_norm(raw) - 1.0) <= 1e-5) return Embedding{raw};
  }
  return normalize_embedding(raw, dim);
}

}  // namespace detail

inline ReadResult read_annotated(std::istream& in, const ReadOptions& opts = {},
                                 const std::string& source = "<input>") {
  ReadResult result;
  result.dim = opts.dim;
  if (result.dim == 0 && opts.toy_embed) result.dim = opts.toy_dim;

  std::map<std::string, std::size_t> dialogue_index;
  std::set<std::tuple<std::string, std::int64_t, std::int64_t>> seen_keys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const Json j = parse_json(line, where);
    AnnotatedTurn turn;
    turn.entry = entry_from_json(j, where);
    turn.entry.id = kUnassignedId;
    turn.gold = gold_from_json(j, where);
    if (auto it = j.find("meta"); it != j.end() && !it->is_null()) {
      if (!it->is_object()) detail::schema_error(where, "meta must be an object");
      turn.meta = *it;
    }
    std::optional<std::string> gap_tag;
    if (auto it = j.find("gap_tag"); it != j.end() && !it->is_null()) {
      gap_tag = detail::required<std::string>(j, "gap_tag", where);
    }
    ++result.records;

    auto& e = turn.entry;
    const auto key = std::make_tuple(e.dialogue_id, e.session_id, e.turn_id);
    if (!seen_keys.insert(key).second) {
      throw Error(ErrorCode::kDuplicate,
                  where + ": duplicate (dialogue_id, session_id, turn_id) = (" + e.dialogue_id +
                      ", " + std::to_string(e.session_id) + ", " + std::to_string(e.turn_id) + ")");
    }

    std::vector<std::string> violations;
    if (e.embedding.values.empty()) {
      if (opts.toy_embed) {
        e.embedding = toy_embed(e.utterance, result.dim);
      } else {
        violations.push_back("missing embedding");
      }
    } else {
      if (result.dim == 0) result.dim = e.embedding.values.size();
      try {
        e.embedding = detail::ingest_embedding(e.embedding.values, result.dim);
      } catch (const Error& err) {
        violations.push_back(err.what());
      }
    }
    if (violations.empty()) {
      for (auto& v : validate_entry(e, result.dim).violations) violations.push_back(std::move(v));
    }
    if (gap_tag && !valid_gap_tag(*gap_tag)) violations.push_back("malformed gap tag " + *gap_tag);
    if (turn.gold && turn.gold->supporting_entry_ids.empty() && trim(turn.gold->answer_span).empty()) {
      violations.push_back("gold without supporting entry ids or answer span");
    }
    if (!violations.empty()) {
      result.rejected.push_back({line_no, std::move(violations)});
      continue;
    }

    auto [it, inserted] = dialogue_index.emplace(e.dialogue_id, result.dialogues.size());
    if (inserted) {
      AnnotatedDialogue d;
      d.dialogue_id = e.dialogue_id;
      result.dialogues.push_back(std::move(d));
    }
    auto& dialogue = result.dialogues[it->second];
    if (auto dm = j.find("dialogue_meta"); dm != j.end() && dm->is_object()) {
      for (auto m = dm->begin(); m != dm->end(); ++m) {
        dialogue.metadata[m.key()] = m->is_string() ? m->get<std::string>() : m->dump();
      }
    }
    if (dialogue.sessions.empty() || dialogue.sessions.back().session_id != e.session_id) {
      if (!dialogue.sessions.empty() && dialogue.sessions.back().session_id > e.session_id) {
        detail::schema_error(where, "session ids must be strictly increasing within a dialogue");
      }
      Session s;
      s.session_id = e.session_id;
      dialogue.sessions.push_back(std::move(s));
    }
    auto& session = dialogue.sessions.back();
    if (!session.turns.empty() && session.turns.back().entry.turn_id >= e.turn_id) {
      detail::schema_error(where, "turn ids must be strictly increasing within a session");
    }
    if (gap_tag && session.turns.empty()) session.gap_tag = gap_tag;
    session.turns.push_back(std::move(turn));
  }
  return result;
}

inline ReadResult read_annotated(const std::string& path, const ReadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_annotated(in, opts, path);
}

// ---------------------------------------------------------------------------
// Writing

inline Json turn_to_record(const AnnotatedDialogue& d, const Session& s, std::size_t turn_index) {
  const auto& turn = s.turns[turn_index];
  Json j = entry_to_json(turn.entry);
  j.erase("id");
  j["dialogue_id"] = d.dialogue_id;
  j["session_id"] = s.session_id;
  if (turn_index == 0 && s.gap_tag) j["gap_tag"] = *s.gap_tag;
  if (turn.gold) j["gold"] = gold_to_json(*turn.gold);
  if (turn.meta.is_object() && !turn.meta.empty()) j["meta"] = turn.meta;
  return j;
}

inline void write_annotated(const Corpus& corpus, std::ostream& out) {
  for (const auto& d : corpus) {
    bool first = true;
    for (const auto& s : d.sessions) {
      for (std::size_t t = 0; t < s.turns.size(); ++t) {
        Json j = turn_to_record(d, s, t);
        if (first && !d.metadata.empty()) j["dialogue_meta"] = d.metadata;
        first = false;
        out << canonical_dump(j) << '\n';
      }
    }
  }
}

inline std::string write_annotated(const Corpus& corpus) {
  std::ostringstream os;
  write_annotated(corpus, os);
  return os.str();
}

inline void write_annotated(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  write_annotated(corpus, out);
}

// ---------------------------------------------------------------------------
// Corpus helpers

// Assigns ids to memory (non-query) turns in corpus order; returns the next
// free id.
inline EntryId assign_entry_ids(Corpus& corpus, EntryId first_id = 0) {
  EntryId next = first_id;
  for (auto& d : corpus) {
    for (auto& s : d.sessions) {
      for (auto& t : s.turns) {
        t.entry.id = t.is_query() ? kUnassignedId : next++;
      }
    }
  }
  return next;
}

inline std::vector<MemoryEntry> memory_entries(const Corpus& corpus) {
  std::vector<MemoryEntry> out;
  for (const auto& d : corpus) {
    for (const auto& s : d.sessions) {
      for (const auto& t : s.turns) {
        if (!t.is_query()) out.push_back(t.entry);
      }
    }
  }
  return out;
}

inline std::string turn_label(const MemoryEntry& e) {
  return e.dialogue_id + "/" + std::to_string(e.session_id) + "/" + std::to_string(e.turn_id);
}

inline Query query_from_turn(const AnnotatedTurn& t) {
  Query q;
  q.id = turn_label(t.entry);
  q.text = t.entry.utterance;
  q.embedding = t.entry.embedding;
  q.entities = t.entry.entities;
  q.discourse = t.entry.discourse;
  q.dep_triples = t.entry.dep_triples;
  q.gold = t.gold;
  if (auto it = t.meta.find("query_class"); it != t.meta.end() && it->is_string()) {
    q.query_class = it->get<std::string>();
  }
  return q;
}

inline std::vector<Query> corpus_queries(const Corpus& corpus) {
  std::vector<Query> out;
  for (const auto& d : corpus) {
    for (const auto& s : d.sessions) {
      for (const auto& t : s.turns) {
        if (t.is_query()) out.push_back(query_from_turn(t));
      }
    }
  }
  return out;
}

}  // namespace lingmem
