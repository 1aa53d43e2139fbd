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

// Factual Recall, retrieval-level Discourse Coherence, ablation variants
// and the staged latency benchmark.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lingmem/canonical_json.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/memory_store.hpp"
#include "lingmem/retrieval.hpp"

namespace lingmem {

struct QueryOutcome {
  std::string query_id;
  std::string query_class;
  bool recalled = false;
  std::optional<std::size_t> hit_rank;  // 1-based
  std::optional<EntryId> matched_entry;
  std::optional<RankedResult> breakdown;  // of the matched entry
  std::optional<double> dc;               // absent when nothing comparable
};

struct FrResult {
  double fr = 0.0;
  std::size_t recalled = 0;
  std::size_t total = 0;
  std::vector<QueryOutcome> per_query;
};

struct DcResult {
  double dc = 0.0;
  std::size_t scored_queries = 0;
  std::size_t excluded_queries = 0;
  std::vector<std::optional<double>> per_query;
};

inline void require_gold(std::span<const Query> queries) {
  for (const auto& q : queries) {
    if (!q.gold) throw Error(ErrorCode::kInvalidArgument, "query " + q.id + " has no gold info");
  }
}

// An entry recalls a query if it is a gold supporting entry or contains the
// gold answer span (lowercased, whitespace-collapsed).
inline bool recalls(const MemoryEntry& entry, const GoldInfo& gold) {
  if (std::find(gold.supporting_entry_ids.begin(), gold.supporting_entry_ids.end(), entry.id) !=
      gold.supporting_entry_ids.end()) {
    return true;
  }
  const std::string span = normalize_span_text(gold.answer_span);
  return !span.empty() && normalize_span_text(entry.utterance).find(span) != std::string::npos;
}

inline QueryOutcome score_outcome(const Query& q, std::span<const RankedResult> results,
                                  const MemoryStore& store) {
  QueryOutcome o;
  o.query_id = q.id;
  o.query_class = q.query_class;
  for (std::size_t r = 0; r < results.size(); ++r) {
    if (recalls(store.entry(results[r].entry_id), *q.gold)) {
      o.recalled = true;
      o.hit_rank = r + 1;
      o.matched_entry = results[r].entry_id;
      o.breakdown = results[r];
      break;
    }
  }
  return o;
}

inline FrResult eval_fr(const MemoryStore& store, std::span<const Query> queries,
                        const RetrievalConfig& config) {
  require_gold(queries);
  FrResult out;
  out.total = queries.size();
  for (const auto& q : queries) {
    const auto results = retrieve(store, q, config);
    out.per_query.push_back(score_outcome(q, results, store));
    if (out.per_query.back().recalled) ++out.recalled;
  }
  out.fr = out.total == 0 ? 0.0 : static_cast<double>(out.recalled) / static_cast<double>(out.total);
  return out;
}

// Fraction of retrieved entity mentions, among those whose name appears in
// the gold assignment map, that carry the gold coref id.
inline std::optional<double> query_dc(const Query& q, std::span<const RankedResult> results,
                                      const MemoryStore& store) {
  if (!q.gold || !q.gold->coref_assignments) return std::nullopt;
  std::map<std::string, std::string> gold;
  for (const auto& [name, id] : *q.gold->coref_assignments) gold[normalize_span_text(name)] = id;
  std::size_t comparable = 0, agree = 0;
  for (const auto& r : results) {
    for (const auto& m : store.entry(r.entry_id).entities) {
      auto it = gold.find(normalize_span_text(m.name));
      if (it == gold.end()) continue;
      ++comparable;
      if (it->second == m.coref_id) ++agree;
    }
  }
  if (comparable == 0) return std::nullopt;
  return static_cast<double>(agree) / static_cast<double>(comparable);
}

inline DcResult aggregate_dc(const std::vector<std::optional<double>>& per_query) {
  DcResult out;
  out.per_query = per_query;
  double sum = 0.0;
  for (const auto& v : per_query) {
    if (v) {
      sum += *v;
      ++out.scored_queries;
    } else {
      ++out.excluded_queries;
    }
  }
  if (out.scored_queries == 0) {
    throw Error(ErrorCode::kEmpty, "discourse coherence: no query has comparable entities");
  }
  out.dc = sum / static_cast<double>(out.scored_queries);
  return out;
}

inline DcResult eval_dc(const MemoryStore& store, std::span<const Query> queries,
                        const RetrievalConfig& config) {
  std::vector<std::optional<double>> per_query;
  for (const auto& q : queries) {
    if (!q.gold || !q.gold->coref_assignments) {
      per_query.push_back(std::nullopt);
      continue;
    }
    per_query.push_back(query_dc(q, retrieve(store, q, config), store));
  }
  return aggregate_dc(per_query);
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  double fr = 0.0;
  std::optional<double> dc;
  std::size_t dc_excluded = 0;
  std::vector<QueryOutcome> per_query;
  Json config = Json::object();
  std::size_t runs = 1;
  std::optional<double> fr_std;
  std::optional<double> dc_std;

  Json to_json() const {
    Json pq = Json::array();
    for (const auto& o : per_query) {
      Json j = {{"query_id", o.query_id}, {"recalled", o.recalled}};
      if (!o.query_class.empty()) j["query_class"] = o.query_class;
      if (o.hit_rank) j["hit_rank"] = *o.hit_rank;
      if (o.matched_entry) j["matched_entry"] = *o.matched_entry;
      if (o.breakdown) j["breakdown"] = result_to_json(*o.breakdown);
      if (o.dc) j["dc"] = *o.dc;
      pq.push_back(std::move(j));
    }
    Json j = {{"fr", fr},
              {"per_query", pq},
              {"config", config},
              {"runs", runs},
              {"dc_excluded_queries", dc_excluded}};
    j["dc"] = dc ? Json(*dc) : Json(nullptr);
    if (fr_std) j["fr_std"] = *fr_std;
    if (dc_std) j["dc_std"] = *dc_std;
    return j;
  }
};

inline double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// FR and (when any query carries coref assignments) DC, averaged over
// `runs` repetitions.
inline EvalReport evaluate(const MemoryStore& store, std::span<const Query> queries,
                           const RetrievalConfig& config, std::size_t runs = 1) {
  require_gold(queries);
  if (runs == 0) throw Error(ErrorCode::kInvalidArgument, "runs must be >= 1");
  EvalReport report;
  report.config = config.to_json();
  report.runs = runs;
  std::vector<double> frs, dcs;
  for (std::size_t run = 0; run < runs; ++run) {
    std::vector<QueryOutcome> outcomes;
    std::vector<std::optional<double>> dc_per_query;
    std::size_t recalled = 0;
    for (const auto& q : queries) {
      const auto results = retrieve(store, q, config);
      auto o = score_outcome(q, results, store);
      o.dc = query_dc(q, results, store);
      dc_per_query.push_back(o.dc);
      if (o.recalled) ++recalled;
      outcomes.push_back(std::move(o));
    }
    frs.push_back(queries.empty() ? 0.0
                                  : static_cast<double>(recalled) / static_cast<double>(queries.size()));
    try {
      const auto dc = aggregate_dc(dc_per_query);
      dcs.push_back(dc.dc);
      report.dc_excluded = dc.excluded_queries;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmpty) throw;
      report.dc_excluded = queries.size();
    }
    if (run == 0) report.per_query = std::move(outcomes);
  }
  auto mean = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  report.fr = mean(frs);
  if (!dcs.empty()) report.dc = mean(dcs);
  if (runs > 1) {
    report.fr_std = sample_std(frs);
    if (!dcs.empty()) report.dc_std = sample_std(dcs);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationVariant {
  std::string name;
  RetrievalConfig config;
};

inline std::vector<AblationVariant> ablation_variants(const RetrievalConfig& base) {
  std::vector<AblationVariant> out;
  out.push_back({"full", base});

  RetrievalConfig no_disc = base;
  no_disc.weights = {base.weights.lambda_s + base.weights.lambda_c, base.weights.lambda_e, 0.0};
  out.push_back({"no-discourse", no_disc});

  RetrievalConfig no_coref = base;
  no_coref.use_coref = false;
  out.push_back({"no-coref", no_coref});

  RetrievalConfig no_dep = base;
  no_dep.use_dep_keys = false;
  out.push_back({"no-dep", no_dep});

  RetrievalConfig dense_only = base;
  dense_only.weights = {1.0, 0.0, 0.0};
  dense_only.symbolic_cap = 0;
  out.push_back({"dense-only", dense_only});
  return out;
}

struct AblationRow {
  std::string variant;
  EvalReport report;
  double delta_fr = 0.0;
  std::optional<double> delta_dc;
};

inline std::vector<AblationRow> run_ablation(const MemoryStore& store, std::span<const Query> queries,
                                             const RetrievalConfig& base) {
  std::vector<AblationRow> rows;
  for (const auto& v : ablation_variants(base)) {
    AblationRow row;
    row.variant = v.name;
    row.report = evaluate(store, queries, v.config);
    rows.push_back(std::move(row));
  }
  const auto& full = rows.front().report;
  for (auto& row : rows) {
    row.delta_fr = row.report.fr - full.fr;
    if (row.report.dc && full.dc) row.delta_dc = *row.report.dc - *full.dc;
  }
  return rows;
}

inline Json ablation_to_json(const std::vector<AblationRow>& rows) {
  Json arr = Json::array();
  for (const auto& r : rows) {
    Json j = {{"variant", r.variant}, {"fr", r.report.fr}, {"delta_fr", r.delta_fr}};
    j["dc"] = r.report.dc ? Json(*r.report.dc) : Json(nullptr);
    j["delta_dc"] = r.delta_dc ? Json(*r.delta_dc) : Json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Latency

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;

  Json to_json() const {
    return {{"mean_ms", mean_ms}, {"p50_ms", p50_ms}, {"p95_ms", p95_ms}, {"p99_ms", p99_ms}};
  }
};

// Nearest-rank percentiles over the samples.
inline LatencyStats summarize_latencies(std::vector<double> samples_ms) {
  LatencyStats s;
  if (samples_ms.empty()) return s;
  std::sort(samples_ms.begin(), samples_ms.end());
  double sum = 0.0;
  for (double x : samples_ms) sum += x;
  s.mean_ms = sum / static_cast<double>(samples_ms.size());
  auto pct = [&](double p) {
    const auto n = static_cast<double>(samples_ms.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, samples_ms.size());
    return samples_ms[rank - 1];
  };
  s.p50_ms = pct(50);
  s.p95_ms = pct(95);
  s.p99_ms = pct(99);
  return s;
}

struct LatencyReport {
  std::size_t queries = 0;
  std::size_t warmup = 0;
  std::size_t store_size = 0;
  LatencyStats dense;
  LatencyStats symbolic;
  LatencyStats fusion;
  LatencyStats total;

  Json to_json() const {
    return {{"queries", queries},       {"warmup", warmup},
            {"store_size", store_size}, {"dense", dense.to_json()},
            {"symbolic", symbolic.to_json()}, {"fusion", fusion.to_json()},
            {"total", total.to_json()}};
  }
};

// Runs the three stages back to back on the calling thread for
// warmup + n queries (cycling through `queries`) and reports statistics
// over the last n. No I/O happens inside the timed region.
inline LatencyReport latency_bench(const MemoryStore& store, std::span<const Query> queries,
                                   const RetrievalConfig& config, std::size_t warmup,
                                   std::size_t n = 1000) {
  if (queries.empty()) throw Error(ErrorCode::kEmpty, "latency bench: empty query set");
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "latency bench: n must be >= 1");
  if (store.empty()) throw Error(ErrorCode::kEmpty, "latency bench: empty store");
  config.validate();
  using Clock = std::chrono::steady_clock;
  auto ms = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  std::vector<double> dense, symbolic, fusion, total;
  std::size_t sink = 0;
  for (std::size_t i = 0; i < warmup + n; ++i) {
    const Query& q = queries[i % queries.size()];
    const auto t0 = Clock::now();
    const auto d = dense_stage(store, q, config);
    const auto t1 = Clock::now();
    const auto s = symbolic_stage(store, q, config);
    const auto t2 = Clock::now();
    const auto r = fusion_stage(store, q, config, d, s);
    const auto t3 = Clock::now();
    sink += r.size();
    if (i < warmup) continue;
    dense.push_back(ms(t0, t1));
    symbolic.push_back(ms(t1, t2));
    fusion.push_back(ms(t2, t3));
    total.push_back(ms(t0, t3));
  }
  (void)sink;
  LatencyReport rep;
  rep.queries = n;
  rep.warmup = warmup;
  rep.store_size = store.size();
  rep.dense = summarize_latencies(dense);
  rep.symbolic = summarize_latencies(symbolic);
  rep.fusion = summarize_latencies(fusion);
  rep.total = summarize_latencies(total);
  return rep;
}

}  // namespace lingmem
