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

// Hybrid retrieval: dense candidates and symbolic candidates are pooled,
// every pooled entry is scored
//
//   score = l_s * cos(v_i, v_q) + l_e * entity_match + l_c * discourse_match
//
// and the top k are returned with their per-term breakdown.

#include <algorithm>
#include <cmath>
#include <future>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lingmem/canonical_json.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/memory_model.hpp"
#include "lingmem/memory_store.hpp"
#include "lingmem/symbolic_index.hpp"

namespace lingmem {

enum class DiscourseMode { kBinary, kGraded };
enum class EntityWeighting { kLog, kLinear, kUniform };

inline const char* to_string(DiscourseMode m) { return m == DiscourseMode::kBinary ? "binary" : "graded"; }

inline DiscourseMode parse_discourse_mode(const std::string& s) {
  const std::string l = to_lower(s);
  if (l == "binary") return DiscourseMode::kBinary;
  if (l == "graded") return DiscourseMode::kGraded;
  throw Error(ErrorCode::kInvalidArgument, "unknown discourse mode '" + s + "'");
}

inline const char* to_string(EntityWeighting w) {
  switch (w) {
    case EntityWeighting::kLog: return "log";
    case EntityWeighting::kLinear: return "linear";
    case EntityWeighting::kUniform: return "uniform";
  }
  return "log";
}

inline EntityWeighting parse_entity_weighting(const std::string& s) {
  const std::string l = to_lower(s);
  if (l == "log") return EntityWeighting::kLog;
  if (l == "linear") return EntityWeighting::kLinear;
  if (l == "uniform") return EntityWeighting::kUniform;
  throw Error(ErrorCode::kInvalidArgument, "unknown entity weighting '" + s + "'");
}

struct RetrievalConfig {
  FusionWeights weights;
  std::size_t dense_n = 50;
  std::size_t symbolic_cap = 200;
  std::size_t k = 5;
  DiscourseMode discourse_mode = DiscourseMode::kGraded;
  EntityWeighting entity_weighting = EntityWeighting::kLog;
  // Exhaustive dense scan instead of the HNSW graph.
  bool exact_dense = false;
  // Off: entities match on surface names only and coref keys are not used
  // for candidates.
  bool use_coref = true;
  // Off: dependency-triple keys are not used for candidates.
  bool use_dep_keys = true;
  // Run the dense and symbolic lookups on separate threads.
  bool parallel = true;

  void validate() const {
    if (!weights.valid()) throw Error(ErrorCode::kInvalidArgument, "fusion weights must lie on the simplex");
    if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    if (dense_n < k) throw Error(ErrorCode::kInvalidArgument, "dense_n must be >= k");
  }

  Json to_json() const {
    return {{"weights", {weights.lambda_s, weights.lambda_e, weights.lambda_c}},
            {"dense_n", dense_n},
            {"symbolic_cap", symbolic_cap},
            {"k", k},
            {"discourse_mode", to_string(discourse_mode)},
            {"entity_weighting", to_string(entity_weighting)},
            {"exact_dense", exact_dense},
            {"use_coref", use_coref},
            {"use_dep_keys", use_dep_keys}};
  }

  // Reads the keys present in `j`, keeping current values for the rest.
  void update_from_json(const Json& j) {
    try {
      if (j.contains("weights")) {
        const auto w = j.at("weights").get<std::vector<double>>();
        if (w.size() != 3) throw Error(ErrorCode::kInvalidArgument, "weights must have 3 values");
        weights = FusionWeights::checked(w[0], w[1], w[2]);
      }
      if (j.contains("dense_n")) dense_n = j.at("dense_n").get<std::size_t>();
      if (j.contains("symbolic_cap")) symbolic_cap = j.at("symbolic_cap").get<std::size_t>();
      if (j.contains("k")) k = j.at("k").get<std::size_t>();
      if (j.contains("discourse_mode")) discourse_mode = parse_discourse_mode(j.at("discourse_mode").get<std::string>());
      if (j.contains("entity_weighting")) entity_weighting = parse_entity_weighting(j.at("entity_weighting").get<std::string>());
      if (j.contains("exact_dense")) exact_dense = j.at("exact_dense").get<bool>();
      if (j.contains("use_coref")) use_coref = j.at("use_coref").get<bool>();
      if (j.contains("use_dep_keys")) use_dep_keys = j.at("use_dep_keys").get<bool>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("retrieval config: ") + e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// Score terms

inline double entity_weight(std::size_t cluster_size, EntityWeighting w) {
  switch (w) {
    case EntityWeighting::kLog:
      return std::log(1.0 + static_cast<double>(std::max<std::size_t>(cluster_size, 1)));
    case EntityWeighting::kLinear:
      return static_cast<double>(std::max<std::size_t>(cluster_size, 1));
    case EntityWeighting::kUniform:
      return 1.0;
  }
  return 1.0;
}

struct EntityMatchOptions {
  EntityWeighting weighting = EntityWeighting::kLog;
  bool use_coref = true;
};

// Weighted share of query entities present in the stored entity list. A
// query entity whose coref id is known to the store matches on coref id;
// an unknown id falls back to the lowercased surface name. Without coref,
// names are the only key and weights are uniform.
template <typename ClusterSizeFn>
double entity_match(std::span<const EntityMention> stored, std::span<const EntityMention> query,
                    ClusterSizeFn&& cluster_size, const EntityMatchOptions& opts = {}) {
  if (query.empty()) return 0.0;
  double total = 0.0;
  double matched = 0.0;
  for (const auto& qe : query) {
    const std::size_t size = opts.use_coref ? cluster_size(qe.coref_id) : 0;
    const double w = opts.use_coref ? entity_weight(size, opts.weighting) : 1.0;
    bool hit = false;
    if (opts.use_coref && size > 0) {
      for (const auto& se : stored) hit = hit || se.coref_id == qe.coref_id;
    } else {
      const std::string name = to_lower(qe.name);
      for (const auto& se : stored) hit = hit || to_lower(se.name) == name;
    }
    total += w;
    if (hit) matched += w;
  }
  return total > 0.0 ? matched / total : 0.0;
}

inline double entity_match(std::span<const EntityMention> stored, std::span<const EntityMention> query,
                           const SymbolicIndex& index, const EntityMatchOptions& opts = {}) {
  return entity_match(stored, query, [&](const std::string& id) { return index.cluster_size(id); },
                      opts);
}

inline double discourse_match(std::span<const DiscourseLabel> stored,
                              std::span<const DiscourseLabel> query, DiscourseMode mode) {
  std::set<std::string> a, b;
  for (const auto& l : stored) a.insert(l.key());
  for (const auto& l : query) b.insert(l.key());
  std::size_t common = 0;
  for (const auto& k : a) common += b.count(k);
  if (mode == DiscourseMode::kBinary) return common > 0 ? 1.0 : 0.0;
  const std::size_t uni = a.size() + b.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

inline RankedResult fuse_score(const MemoryEntry& entry, const Query& query,
                               const RetrievalConfig& config, const SymbolicIndex& index) {
  RankedResult r;
  r.entry_id = entry.id;
  r.sim_term = dot(entry.embedding.values, query.embedding.values);
  r.entity_term = entity_match(entry.entities, query.entities, index,
                               {config.entity_weighting, config.use_coref});
  r.discourse_term = discourse_match(entry.discourse, query.discourse, config.discourse_mode);
  const auto& w = config.weights;
  r.score = w.lambda_s * r.sim_term + w.lambda_e * r.entity_term + w.lambda_c * r.discourse_term;
  return r;
}

// ---------------------------------------------------------------------------
// Retrieval stages

inline std::vector<EntryId> dense_stage(const MemoryStore& store, const Query& query,
                                        const RetrievalConfig& config) {
  const auto hits = config.exact_dense
                        ? store.dense().search_exact(query.embedding.values, config.dense_n)
                        : store.dense().search(query.embedding.values, config.dense_n);
  std::vector<EntryId> ids;
  ids.reserve(hits.size());
  for (const auto& h : hits) ids.push_back(h.id);
  return ids;
}

inline std::vector<EntryId> symbolic_stage(const MemoryStore& store, const Query& query,
                                           const RetrievalConfig& config) {
  SymbolicKeyOptions opts;
  opts.use_coref = config.use_coref;
  opts.use_deps = config.use_dep_keys;
  return store.symbolic().candidates(query, config.symbolic_cap, opts);
}

// Final order: score desc, timestamp desc (more recent first), id asc.
inline void rank_results(std::vector<RankedResult>& results, const MemoryStore& store) {
  std::sort(results.begin(), results.end(), [&](const RankedResult& a, const RankedResult& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto& ta = store.entry(a.entry_id).timestamp;
    const auto& tb = store.entry(b.entry_id).timestamp;
    if (ta != tb) return ta > tb;
    return a.entry_id < b.entry_id;
  });
}

inline std::vector<RankedResult> fusion_stage(const MemoryStore& store, const Query& query,
                                              const RetrievalConfig& config,
                                              const std::vector<EntryId>& dense_ids,
                                              const std::vector<EntryId>& symbolic_ids) {
  std::vector<EntryId> pool;
  pool.reserve(dense_ids.size() + symbolic_ids.size());
  pool.insert(pool.end(), dense_ids.begin(), dense_ids.end());
  pool.insert(pool.end(), symbolic_ids.begin(), symbolic_ids.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  std::vector<RankedResult> results;
  results.reserve(pool.size());
  for (EntryId id : pool) results.push_back(fuse_score(store.entry(id), query, config, store.symbolic()));
  rank_results(results, store);
  if (results.size() > config.k) results.resize(config.k);
  return results;
}

inline std::vector<RankedResult> retrieve(const MemoryStore& store, const Query& query,
                                          const RetrievalConfig& config) {
  config.validate();
  if (store.empty()) throw Error(ErrorCode::kEmpty, "retrieve: empty store");
  if (query.embedding.dim() != store.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "retrieve: query dim " +
                                                   std::to_string(query.embedding.dim()) +
                                                   " != store dim " + std::to_string(store.dim()));
  }
  std::vector<EntryId> dense_ids, symbolic_ids;
  if (config.parallel) {
    auto symbolic = std::async(std::launch::async, [&] { return symbolic_stage(store, query, config); });
    dense_ids = dense_stage(store, query, config);
    symbolic_ids = symbolic.get();
  } else {
    dense_ids = dense_stage(store, query, config);
    symbolic_ids = symbolic_stage(store, query, config);
  }
  return fusion_stage(store, query, config, dense_ids, symbolic_ids);
}

// Scores every stored entry; the pool-free reading of the procedure.
inline std::vector<RankedResult> retrieve_exhaustive(const MemoryStore& store, const Query& query,
                                                     const RetrievalConfig& config) {
  config.validate();
  if (store.empty()) throw Error(ErrorCode::kEmpty, "retrieve: empty store");
  std::vector<RankedResult> results;
  results.reserve(store.size());
  for (const auto& [id, e] : store.entries()) results.push_back(fuse_score(e, query, config, store.symbolic()));
  rank_results(results, store);
  if (results.size() > config.k) results.resize(config.k);
  return results;
}

inline Json result_to_json(const RankedResult& r) {
  return {{"entry_id", r.entry_id},
          {"score", r.score},
          {"sim_term", r.sim_term},
          {"entity_term", r.entity_term},
          {"discourse_term", r.discourse_term}};
}

// ---------------------------------------------------------------------------
// Context serialization

// "2024-03-14T09:10:00Z" -> "2024-03-14 09:10".
inline std::string render_timestamp(const std::string& iso) {
  if (iso.size() >= 16 && (iso[10] == 'T' || iso[10] == ' ') && iso[13] == ':') {
    return iso.substr(0, 10) + " " + iso.substr(11, 5);
  }
  return iso;
}

// Emits, per entry: entity lines and one discourse line within the metadata
// budget (entities beyond it are elided with a "+N more" marker), the
// utterance line, and a dependency line when nothing had to be dropped.
inline std::string serialize_entry(const MemoryEntry& e, std::size_t budget = 2) {
  std::string out;
  const std::size_t n_entities = e.entities.size();
  const bool has_discourse = !e.discourse.empty();

  std::size_t entity_lines = 0;
  if (n_entities > 0 && budget > 0) {
    entity_lines = has_discourse ? std::max<std::size_t>(budget - 1, 1) : budget;
    entity_lines = std::min(entity_lines, n_entities);
  }
  const bool show_discourse = has_discourse && entity_lines + 1 <= budget;
  const std::size_t elided = n_entities - entity_lines;

  for (std::size_t i = 0; i < entity_lines; ++i) {
    const auto& m = e.entities[i];
    out += "[ENTITY: " + m.name + " | CorefID=" + m.coref_id + " | NER=" + m.ner_type + "]";
    if (i + 1 == entity_lines && elided > 0) out += " +" + std::to_string(elided) + " more";
    out += '\n';
  }
  if (show_discourse) {
    out += "[DISCOURSE: ";
    for (std::size_t i = 0; i < e.discourse.size(); ++i) {
      if (i) out += ", ";
      out += e.discourse[i].name();
    }
    out += "]\n";
  }
  out += "[UTTERANCE @ " + render_timestamp(e.timestamp) + "] \"" + e.utterance + "\"\n";
  const bool dropped = elided > 0 || (has_discourse && !show_discourse);
  if (!e.dep_triples.empty() && !dropped) {
    out += "[DEPS: ";
    for (std::size_t i = 0; i < e.dep_triples.size(); ++i) {
      const auto& t = e.dep_triples[i];
      if (i) out += ", ";
      out += "(" + t.head + "-" + t.label + "-" + t.child + ")";
    }
    out += "]\n";
  }
  return out;
}

inline std::string serialize_context(std::span<const RankedResult> results, const MemoryStore& store,
                                     std::size_t budget_lines_per_entry = 2) {
  std::string out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i) out += '\n';
    out += serialize_entry(store.entry(results[i].entry_id), budget_lines_per_entry);
  }
  return out;
}

}  // namespace lingmem
