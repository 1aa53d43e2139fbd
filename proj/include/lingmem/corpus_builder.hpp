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

// Multi-session corpus construction:
//  - sessionize: boundaries after goal-closing turns or once a drawn turn
//    budget is exceeded, committed only when an entity of the closing
//    segment recurs later; each new session carries a <GAP=hours:H> tag.
//  - extend_long_range: boundaries every drawn 6-10 turns, later-session
//    repeats of proper names rewritten to pronouns (coref ids kept), and at
//    least one gold query must need evidence from an earlier session.
//  - audit: sampled check that some gold fact is introduced in an earlier
//    session than the query that asks for it.
//
// Per-turn flags are read from `meta`: "goal_complete" and
// "relation_evidence".

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lingmem/annotation.hpp"
#include "lingmem/canonical_json.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/toy_annotator.hpp"
#include "lingmem/util.hpp"

namespace lingmem {

struct SessionizerConfig {
  int turn_budget_min = 8;
  int turn_budget_max = 12;
  std::vector<std::int64_t> gap_hours_choices{12, 36, 72};
  std::uint64_t rng_seed = 0;
  double audit_fraction = 0.05;

  void validate() const {
    if (turn_budget_min < 1 || turn_budget_min > turn_budget_max) {
      throw Error(ErrorCode::kInvalidArgument, "sessionizer: need 1 <= turn_budget_min <= turn_budget_max");
    }
    if (gap_hours_choices.empty()) throw Error(ErrorCode::kInvalidArgument, "sessionizer: no gap choices");
    if (!(audit_fraction >= 0.0 && audit_fraction <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "sessionizer: audit_fraction must be in [0, 1]");
    }
  }
};

struct LongRangeConfig {
  int boundary_min = 6;
  int boundary_max = 10;
  std::map<std::string, std::vector<std::string>> pronoun_map{
      {"PERSON", {"he"}}, {"LOC", {"it"}}, {"ORG", {"it"}}, {"MISC", {"it"}}};
  std::uint64_t rng_seed = 0;
  int retry_limit = 16;
  // Re-embed rewritten turns with the toy embedder at this dimensionality.
  std::optional<std::size_t> toy_reembed_dim;

  void validate() const {
    if (boundary_min < 1 || boundary_min > boundary_max) {
      throw Error(ErrorCode::kInvalidArgument, "long-range: need 1 <= boundary_min <= boundary_max");
    }
    if (retry_limit < 1) throw Error(ErrorCode::kInvalidArgument, "long-range: retry_limit must be >= 1");
  }
};

struct RewriteRecord {
  std::size_t turn_index = 0;  // position in the flattened dialogue
  std::string coref_id;
  std::string from;
  std::string to;
};

struct BuildResult {
  AnnotatedDialogue dialogue;
  // Flattened turn counts before each boundary, e.g. {10} = split after
  // the 10th turn.
  std::vector<std::size_t> boundaries;
  std::vector<RewriteRecord> rewrites;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<AnnotatedTurn> flatten(const AnnotatedDialogue& d) {
  std::vector<AnnotatedTurn> out;
  for (const auto& s : d.sessions) out.insert(out.end(), s.turns.begin(), s.turns.end());
  return out;
}

// Splits `turns` at `boundaries`; turn ids are kept when they increase
// strictly over the whole dialogue and renumbered otherwise.
inline AnnotatedDialogue assemble(const AnnotatedDialogue& src, std::vector<AnnotatedTurn> turns,
                                  const std::vector<std::size_t>& boundaries,
                                  const std::vector<std::optional<std::string>>& gap_tags) {
  bool increasing = true;
  for (std::size_t i = 1; i < turns.size(); ++i) {
    increasing = increasing && turns[i - 1].entry.turn_id < turns[i].entry.turn_id;
  }
  AnnotatedDialogue out;
  out.dialogue_id = src.dialogue_id;
  out.metadata = src.metadata;
  std::size_t b = 0;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i == 0 || (b < boundaries.size() && boundaries[b] == i)) {
      if (i != 0) ++b;
      Session s;
      s.session_id = static_cast<std::int64_t>(out.sessions.size());
      if (out.sessions.size() < gap_tags.size()) s.gap_tag = gap_tags[out.sessions.size()];
      out.sessions.push_back(std::move(s));
    }
    auto& turn = turns[i];
    turn.entry.session_id = out.sessions.back().session_id;
    if (!increasing) turn.entry.turn_id = static_cast<std::int64_t>(i);
    out.sessions.back().turns.push_back(std::move(turn));
  }
  return out;
}

inline bool is_pronoun(const std::string& name) {
  return toy::pronoun_class(to_lower(name)) != toy::PronounClass::kNone;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline BuildResult sessionize(const AnnotatedDialogue& dialogue, const SessionizerConfig& cfg) {
  cfg.validate();
  BuildResult out;
  auto turns = detail::flatten(dialogue);
  const std::size_t n = turns.size();
  if (n < 2) {
    out.dialogue = dialogue;
    out.warnings.push_back("dialogue " + dialogue.dialogue_id + " too short to split");
    return out;
  }

  // Last position of each coreference cluster.
  std::map<std::string, std::size_t> last_seen;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : turns[i].entry.entities) last_seen[e.coref_id] = i;
  }

  Rng rng(cfg.rng_seed, dialogue.dialogue_id);
  auto draw_budget = [&] {
    return static_cast<std::size_t>(rng.uniform_int(cfg.turn_budget_min, cfg.turn_budget_max));
  };
  std::vector<std::optional<std::string>> gap_tags{std::nullopt};
  std::size_t start = 0;
  std::size_t budget = draw_budget();
  std::size_t reach = 0;  // furthest later occurrence of any entity in the segment
  bool any_in_segment = false;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (const auto& e : turns[i].entry.entities) {
      reach = std::max(reach, last_seen[e.coref_id]);
      any_in_segment = true;
    }
    const bool wants_boundary = turns[i].flag("goal_complete") || i - start + 1 >= budget;
    if (wants_boundary && any_in_segment && reach > i) {
      out.boundaries.push_back(i + 1);
      gap_tags.push_back(make_gap_tag(rng.pick(cfg.gap_hours_choices)));
      start = i + 1;
      budget = draw_budget();
      reach = 0;
      any_in_segment = false;
    }
  }
  if (out.boundaries.empty()) {
    out.warnings.push_back("dialogue " + dialogue.dialogue_id +
                           ": no entity recurs across any candidate boundary; kept as one session");
  }
  out.dialogue = detail::assemble(dialogue, std::move(turns), out.boundaries, gap_tags);
  return out;
}

// ---------------------------------------------------------------------------

struct AuditRecord {
  std::string dialogue_id;
  bool pass = false;
  std::string reason;

  Json to_json() const { return {{"dialogue_id", dialogue_id}, {"pass", pass}, {"reason", reason}}; }
};

struct AuditReport {
  std::vector<AuditRecord> records;

  double pass_fraction() const {
    if (records.empty()) return 0.0;
    std::size_t passed = 0;
    for (const auto& r : records) passed += r.pass ? 1 : 0;
    return static_cast<double>(passed) / static_cast<double>(records.size());
  }
};

inline std::size_t audit_sample_size(double fraction, std::size_t dialogues) {
  return std::min(dialogues, static_cast<std::size_t>(
                                 std::ceil(fraction * static_cast<double>(dialogues) - 1e-9)));
}

// Entry ids follow the corpus convention of assign_entry_ids(corpus, 0).
inline AuditReport audit(const Corpus& corpus, const SessionizerConfig& cfg) {
  cfg.validate();
  std::map<EntryId, std::pair<std::size_t, std::int64_t>> where;  // id -> (dialogue, session)
  EntryId next = 0;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (const auto& s : corpus[d].sessions) {
      for (const auto& t : s.turns) {
        if (!t.is_query()) where[next++] = {d, s.session_id};
      }
    }
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(cfg.rng_seed, "audit");
  rng.shuffle(order);
  order.resize(audit_sample_size(cfg.audit_fraction, corpus.size()));
  std::sort(order.begin(), order.end());

  AuditReport report;
  for (std::size_t d : order) {
    AuditRecord rec{corpus[d].dialogue_id, false, "no gold query"};
    for (const auto& s : corpus[d].sessions) {
      for (const auto& t : s.turns) {
        if (!t.is_query() || rec.pass) continue;
        rec.reason = "gold evidence only in the query's session or later";
        for (EntryId id : t.gold->supporting_entry_ids) {
          auto it = where.find(id);
          if (it != where.end() && it->second.first == d && it->second.second < s.session_id) {
            rec.pass = true;
            rec.reason = "turn " + std::to_string(t.entry.turn_id) + " (session " +
                         std::to_string(s.session_id) + ") recalls entry " + std::to_string(id) +
                         " from session " + std::to_string(it->second.second);
            break;
          }
        }
      }
    }
    report.records.push_back(std::move(rec));
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace detail {

inline bool sentence_initial(const std::string& text, std::size_t pos) {
  std::size_t i = pos;
  while (i > 0 && text[i - 1] == ' ') --i;
  return i == 0 || text[i - 1] == '.' || text[i - 1] == '!' || text[i - 1] == '?';
}

// Replaces one mention's surface form; other spans in the turn are shifted.
inline void rewrite_mention(MemoryEntry& e, std::size_t mention, const std::string& pronoun) {
  auto& m = e.entities[mention];
  std::size_t start, end;
  if (m.span && e.utterance.compare(m.span->start, m.span->end - m.span->start, m.name) == 0) {
    start = m.span->start;
    end = m.span->end;
  } else {
    start = e.utterance.find(m.name);
    if (start == std::string::npos) return;
    end = start + m.name.size();
  }
  std::string surface = pronoun;
  if (sentence_initial(e.utterance, start) && !surface.empty()) {
    surface[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(surface[0])));
  }
  e.utterance.replace(start, end - start, surface);
  const auto delta = static_cast<std::ptrdiff_t>(surface.size()) - static_cast<std::ptrdiff_t>(end - start);
  for (std::size_t k = 0; k < e.entities.size(); ++k) {
    auto& other = e.entities[k];
    if (k == mention || !other.span || other.span->start < end) continue;
    other.span->start = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(other.span->start) + delta);
    other.span->end = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(other.span->end) + delta);
  }
  m.name = surface;
  m.span = CharSpan{start, start + surface.size()};
}

}  // namespace detail

// `first_id` is the entry id of the dialogue's first memory turn under the
// corpus id convention; gold ids are resolved against it.
inline BuildResult extend_long_range(const AnnotatedDialogue& dialogue, const LongRangeConfig& cfg,
                                     EntryId first_id = 0) {
  cfg.validate();
  BuildResult out;
  auto turns = detail::flatten(dialogue);
  const std::size_t n = turns.size();

  std::map<EntryId, std::size_t> position;  // entry id -> flattened index
  bool has_gold = false;
  {
    EntryId id = first_id;
    for (std::size_t i = 0; i < n; ++i) {
      if (turns[i].is_query()) {
        has_gold = true;
      } else {
        position[id++] = i;
      }
    }
  }

  Rng rng(cfg.rng_seed, dialogue.dialogue_id);
  auto draw = [&] {
    std::vector<std::size_t> bounds;
    std::size_t pos = 0;
    while (true) {
      const auto drawn = static_cast<std::size_t>(rng.uniform_int(cfg.boundary_min, cfg.boundary_max));
      if (pos + drawn >= n) break;
      // Prefer a gap whose closing turn is not relation evidence.
      std::size_t chosen = drawn;
      for (std::size_t delta = 0; delta <= static_cast<std::size_t>(cfg.boundary_max - cfg.boundary_min);
           ++delta) {
        bool found = false;
        for (std::size_t g : {drawn - delta, drawn + delta}) {
          if (g < static_cast<std::size_t>(cfg.boundary_min) ||
              g > static_cast<std::size_t>(cfg.boundary_max) || pos + g >= n) {
            continue;
          }
          if (!turns[pos + g - 1].flag("relation_evidence")) {
            chosen = g;
            found = true;
            break;
          }
        }
        if (found) break;
      }
      pos += chosen;
      bounds.push_back(pos);
    }
    return bounds;
  };
  auto session_of = [](const std::vector<std::size_t>& bounds, std::size_t index) {
    return static_cast<std::size_t>(std::upper_bound(bounds.begin(), bounds.end(), index) - bounds.begin());
  };
  auto crosses_session = [&](const std::vector<std::size_t>& bounds) {
    if (!has_gold) return true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!turns[i].is_query()) continue;
      for (EntryId id : turns[i].gold->supporting_entry_ids) {
        auto it = position.find(id);
        if (it != position.end() && session_of(bounds, it->second) < session_of(bounds, i)) return true;
      }
    }
    return false;
  };

  std::optional<std::vector<std::size_t>> accepted;
  for (int attempt = 0; attempt < cfg.retry_limit; ++attempt) {
    auto bounds = draw();
    if (crosses_session(bounds)) {
      accepted = std::move(bounds);
      break;
    }
  }
  if (!accepted) {
    out.dialogue = dialogue;
    out.warnings.push_back("dialogue " + dialogue.dialogue_id + ": no boundary draw within " +
                           std::to_string(cfg.retry_limit) +
                           " attempts puts gold evidence in an earlier session; left unmodified");
    return out;
  }
  out.boundaries = *accepted;

  // Proper names already introduced in an earlier session become pronouns
  // on their first mention in each later session.
  std::map<std::string, std::size_t> first_session;  // coref id -> session of first proper mention
  std::set<std::pair<std::string, std::size_t>> rewritten;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t session = session_of(out.boundaries, i);
    auto& entry = turns[i].entry;
    bool changed = false;
    for (std::size_t k = 0; k < entry.entities.size(); ++k) {
      const auto& m = entry.entities[k];
      if (detail::is_pronoun(m.name) || m.name.empty() ||
          !std::isupper(static_cast<unsigned char>(m.name.front()))) {
        continue;
      }
      auto [it, inserted] = first_session.emplace(m.coref_id, session);
      if (inserted || it->second >= session) continue;
      if (!rewritten.insert({m.coref_id, session}).second) continue;
      auto pm = cfg.pronoun_map.find(m.ner_type);
      if (pm == cfg.pronoun_map.end() || pm->second.empty()) continue;
      const std::string before = m.name;
      detail::rewrite_mention(entry, k, pm->second.front());
      if (entry.entities[k].name == before) continue;
      out.rewrites.push_back({i, entry.entities[k].coref_id, before, entry.entities[k].name});
      changed = true;
    }
    if (changed && cfg.toy_reembed_dim) entry.embedding = toy_embed(entry.utterance, *cfg.toy_reembed_dim);
  }

  std::vector<std::optional<std::string>> no_tags;
  out.dialogue = detail::assemble(dialogue, std::move(turns), out.boundaries, no_tags);
  return out;
}

// Applies a per-dialogue builder to a corpus, tracking the first entry id
// of each dialogue.
template <typename Fn>
std::vector<BuildResult> build_corpus(const Corpus& corpus, Fn&& fn) {
  std::vector<BuildResult> out;
  EntryId first = 0;
  for (const auto& d : corpus) {
    out.push_back(fn(d, first));
    for (const auto& s : d.sessions) {
      for (const auto& t : s.turns) first += t.is_query() ? 0 : 1;
    }
  }
  return out;
}

}  // namespace lingmem
