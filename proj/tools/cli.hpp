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

// The `lingmem` command line. run() is separate from main() so that tests
// can drive commands in-process.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 store corruption.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lingmem/lingmem.hpp"

namespace lingmem::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kCorrupt = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration: a JSON file with optional sections, overridden by flags.
//
//   {"seed": 7, "dim": 256,
//    "hnsw": {"m": 32, "ef_construction": 200, "ef_search": 128},
//    "retrieval": {...RetrievalConfig keys...},
//    "tune": {"grid_step": 0.05, "s_min": 0.4, "s_max": 0.9},
//    "sessionizer": {"turn_budget_min": 8, "turn_budget_max": 12,
//                    "gap_hours_choices": [12, 36, 72], "audit_fraction": 0.05},
//    "long_range": {"boundary_min": 6, "boundary_max": 10, "retry_limit": 16},
//    "synthetic": {...SyntheticSpec keys...},
//    "bench": {"queries": 1000, "warmup": 100}}

inline Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Json j = parse_json(ss.str(), path);
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  return j;
}

inline const Json& section(const Json& cfg, const char* name) {
  static const Json kEmpty = Json::object();
  auto it = cfg.find(name);
  return it != cfg.end() && it->is_object() ? *it : kEmpty;
}

template <typename T>
void take(const Json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception& e) {
    throw UsageError(std::string("config key ") + key + ": " + e.what());
  }
}

inline FusionWeights parse_weights(const std::string& text) {
  std::vector<double> w;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      w.push_back(std::stod(part, &used));
      if (trim(part.substr(used)).size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--weights: not a number: '" + part + "'");
    }
  }
  if (w.size() != 3) throw UsageError("--weights needs three comma-separated values");
  FusionWeights fw{w[0], w[1], w[2]};
  if (!fw.valid()) throw UsageError("--weights must be non-negative and sum to 1");
  return fw;
}

// Shared flags. Values stay unset unless given so the config file can
// supply them.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file; flags override it");
    app->add_option("--seed", seed, "Seed for every random choice");
    app->add_option("-o,--output", output, "Write the report here instead of stdout");
  }
};

struct RetrievalFlags {
  std::optional<std::size_t> k, dense_n, symbolic_cap;
  std::optional<std::string> weights, discourse_mode, entity_weighting;
  bool exact = false;
  bool sequential = false;

  void add(CLI::App* app) {
    app->add_option("--k", k, "Results per query");
    app->add_option("--weights", weights, "lambda_s,lambda_e,lambda_c");
    app->add_option("--dense-n", dense_n, "Dense candidates per query");
    app->add_option("--symbolic-cap", symbolic_cap, "Symbolic candidates per query");
    app->add_option("--discourse-mode", discourse_mode, "binary or graded");
    app->add_option("--entity-weighting", entity_weighting, "log, linear or uniform");
    app->add_flag("--exact", exact, "Exhaustive dense scan instead of HNSW");
    app->add_flag("--sequential", sequential, "Run the two lookups on one thread");
  }

  RetrievalConfig resolve(const Json& cfg) const {
    RetrievalConfig rc;
    try {
      rc.update_from_json(section(cfg, "retrieval"));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    if (k) rc.k = *k;
    if (dense_n) rc.dense_n = *dense_n;
    if (symbolic_cap) rc.symbolic_cap = *symbolic_cap;
    if (weights) rc.weights = parse_weights(*weights);
    try {
      if (discourse_mode) rc.discourse_mode = parse_discourse_mode(*discourse_mode);
      if (entity_weighting) rc.entity_weighting = parse_entity_weighting(*entity_weighting);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    if (exact) rc.exact_dense = true;
    if (sequential) rc.parallel = false;
    rc.dense_n = std::max(rc.dense_n, rc.k);
    try {
      rc.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return rc;
  }
};

struct HnswFlags {
  std::optional<std::uint32_t> m, ef_construction, ef_search;

  void add(CLI::App* app) {
    app->add_option("--m", m, "HNSW neighbours per node");
    app->add_option("--ef-construction", ef_construction, "HNSW build beam width");
    app->add_option("--ef-search", ef_search, "HNSW query beam width");
  }

  HnswParams resolve(const Json& cfg, std::uint64_t seed) const {
    HnswParams p;
    const auto& h = section(cfg, "hnsw");
    take(h, "m", p.m);
    take(h, "ef_construction", p.ef_construction);
    take(h, "ef_search", p.ef_search);
    p.seed = seed;
    take(h, "seed", p.seed);
    if (m) p.m = *m;
    if (ef_construction) p.ef_construction = *ef_construction;
    if (ef_search) p.ef_search = *ef_search;
    try {
      p.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return p;
  }
};

// Either a corpus file (memory turns are indexed in memory, query turns
// evaluated) or a saved store plus a file of query records.
struct DataFlags {
  std::string corpus, store, queries;
  bool toy_embed = false;
  std::optional<std::size_t> dim;

  void add(CLI::App* app) {
    app->add_option("--corpus", corpus, "Annotated corpus (JSONL)");
    app->add_option("--store", store, "Store directory");
    app->add_option("--queries", queries, "Query records with gold (JSONL), used with --store");
    app->add_flag("--toy-embed", toy_embed, "Embed records that lack an embedding with the toy embedder");
    app->add_option("--dim", dim, "Embedding dimensionality");
  }
};

inline std::uint64_t resolve_seed(const Common& c, const Json& cfg, std::uint64_t fallback = 42) {
  std::uint64_t seed = fallback;
  take(cfg, "seed", seed);
  if (c.seed) seed = *c.seed;
  return seed;
}

inline ReadResult read_or_fail(const std::string& path, std::size_t dim, bool toy, std::ostream& err) {
  ReadOptions opts;
  opts.dim = dim;
  opts.toy_embed = toy;
  if (toy && dim) opts.toy_dim = dim;
  auto rr = read_annotated(path, opts);
  if (!rr.rejected.empty()) {
    for (const auto& r : rr.rejected) {
      err << path << ":" << r.line << ": ";
      for (std::size_t i = 0; i < r.violations.size(); ++i) err << (i ? "; " : "") << r.violations[i];
      err << "\n";
    }
    throw Error(ErrorCode::kMalformed, std::to_string(rr.rejected.size()) + " record(s) rejected in " + path);
  }
  return rr;
}

struct Loaded {
  MemoryStore store;
  std::vector<Query> queries;
};

inline Loaded load_data(const DataFlags& f, const Json& cfg, const HnswParams& hnsw, std::ostream& err) {
  std::size_t dim = 0;
  take(cfg, "dim", dim);
  if (f.dim) dim = *f.dim;
  if (!f.corpus.empty()) {
    if (!f.store.empty()) throw UsageError("give either --corpus or --store, not both");
    auto rr = read_or_fail(f.corpus, dim, f.toy_embed, err);
    if (rr.dim == 0) throw Error(ErrorCode::kEmpty, "corpus has no records: " + f.corpus);
    Loaded out{MemoryStore::from_corpus(rr.dialogues, rr.dim, hnsw), corpus_queries(rr.dialogues)};
    return out;
  }
  if (f.store.empty()) throw UsageError("need --corpus or --store");
  if (f.queries.empty()) throw UsageError("--store needs --queries");
  auto store = MemoryStore::open(f.store);
  auto rr = read_or_fail(f.queries, store.dim(), f.toy_embed, err);
  return Loaded{std::move(store), corpus_queries(rr.dialogues)};
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : path_(path), out_(fallback) {}
  std::ostream& stream() { return path_.empty() ? out_ : buffer_; }
  void finish() {
    if (path_.empty()) return;
    write_file_atomic(path_, buffer_.str());
  }

 private:
  std::string path_;
  std::ostream& out_;
  std::ostringstream buffer_;
};

inline std::string fmt(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lingmem: hybrid conversational memory retrieval"};
  app.require_subcommand(1);

  // ingest
  Common ingest_c;
  HnswFlags ingest_h;
  std::string ingest_input, ingest_store;
  std::optional<std::size_t> ingest_dim;
  bool ingest_toy = false;
  auto* ingest = app.add_subcommand("ingest", "Validate annotated records and add them to a store");
  ingest_c.add(ingest);
  ingest_h.add(ingest);
  ingest->add_option("input", ingest_input, "Annotated records (JSONL)")->required();
  ingest->add_option("--store", ingest_store, "Store directory")->required();
  ingest->add_option("--dim", ingest_dim, "Embedding dimensionality of a new store");
  ingest->add_flag("--toy-embed", ingest_toy, "Embed records without an embedding with the toy embedder");

  // query
  Common query_c;
  RetrievalFlags query_r;
  std::string query_store, query_text, query_record, query_dialogue;
  bool query_serialize = false;
  std::size_t query_budget = 2;
  auto* query = app.add_subcommand("query", "Retrieve memories for a query");
  query_c.add(query);
  query_r.add(query);
  query->add_option("--store", query_store, "Store directory")->required();
  auto* text_opt = query->add_option("--text", query_text, "Raw query text (toy annotations)");
  auto* record_opt = query->add_option("--record", query_record, "File holding one annotated query record");
  text_opt->excludes(record_opt);
  query->add_option("--dialogue", query_dialogue, "Dialogue whose turns form the history for --text");
  query->add_flag("--serialize", query_serialize, "Print the serialized context block");
  query->add_option("--budget", query_budget, "Metadata lines per entry when serializing");

  // tune
  Common tune_c;
  RetrievalFlags tune_r;
  HnswFlags tune_h;
  DataFlags tune_d;
  std::optional<double> grid_step, s_min, s_max;
  bool tune_json = false;
  auto* tune = app.add_subcommand("tune", "Grid-search fusion weights for the best FR");
  tune_c.add(tune);
  tune_r.add(tune);
  tune_h.add(tune);
  tune_d.add(tune);
  tune->add_option("--grid-step", grid_step, "Grid spacing");
  tune->add_option("--s-min", s_min, "Smallest lambda_s");
  tune->add_option("--s-max", s_max, "Largest lambda_s");
  tune->add_flag("--json", tune_json, "JSON report");

  // eval
  Common eval_c;
  RetrievalFlags eval_r;
  HnswFlags eval_h;
  DataFlags eval_d;
  bool eval_ablation = false, eval_json = false;
  std::size_t eval_runs = 1;
  auto* eval = app.add_subcommand("eval", "Fact recall and discourse coherence");
  eval_c.add(eval);
  eval_r.add(eval);
  eval_h.add(eval);
  eval_d.add(eval);
  eval->add_flag("--ablation", eval_ablation, "Evaluate the five ablation variants");
  eval->add_option("--runs", eval_runs, "Repetitions (mean and sample std)");
  eval->add_flag("--json", eval_json, "JSON report");

  // sessionize
  Common sess_c;
  std::string sess_input, sess_mode = "split";
  bool sess_audit = false, sess_toy = false;
  std::optional<std::size_t> sess_reembed;
  auto* sess = app.add_subcommand("sessionize", "Split dialogues into sessions");
  sess_c.add(sess);
  sess->add_option("input", sess_input, "Annotated corpus (JSONL)")->required();
  sess->add_option("--mode", sess_mode, "split (goal/budget boundaries) or long-range")
      ->check(CLI::IsMember({"split", "long-range"}));
  sess->add_flag("--audit", sess_audit, "Audit a sample of the output");
  sess->add_flag("--toy-embed", sess_toy, "Embed records without an embedding with the toy embedder");
  sess->add_option("--reembed-dim", sess_reembed, "long-range: re-embed rewritten turns with the toy embedder");

  // synth
  Common synth_c;
  SyntheticSpec synth_spec;
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with gold queries");
  synth_c.add(synth);
  synth->add_option("--dialogues", synth_spec.dialogues);
  synth->add_option("--sessions", synth_spec.sessions);
  synth->add_option("--fillers", synth_spec.filler_turns, "Filler turns per session");
  synth->add_option("--lexical", synth_spec.lexical_queries, "Lexical queries per dialogue");
  synth->add_option("--entity", synth_spec.entity_queries, "Entity queries per dialogue");
  synth->add_option("--discourse", synth_spec.discourse_queries, "Discourse queries per dialogue");
  synth->add_option("--distractors", synth_spec.distractors, "Distractors per entity/discourse query");
  synth->add_option("--distance", synth_spec.gold_distance, "Sessions between gold and query (0 = random)");
  synth->add_option("--dim", synth_spec.dim);

  // bench
  Common bench_c;
  RetrievalFlags bench_r;
  HnswFlags bench_h;
  DataFlags bench_d;
  std::optional<std::size_t> bench_n, bench_warmup;
  auto* bench = app.add_subcommand("bench", "Per-stage query latency");
  bench_c.add(bench);
  bench_r.add(bench);
  bench_h.add(bench);
  bench_d.add(bench);
  bench->add_option("--n", bench_n, "Timed queries");
  bench->add_option("--warmup", bench_warmup, "Untimed warm-up queries");

  // inspect
  std::string inspect_store;
  std::size_t inspect_top = 10;
  auto* inspect = app.add_subcommand("inspect", "Print the manifest and posting statistics");
  inspect->add_option("--store", inspect_store, "Store directory")->required();
  inspect->add_option("--top", inspect_top, "Largest posting lists to list");

  std::vector<const char*> argv{"lingmem"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) {
      const Json cfg = load_config(ingest_c.config_path);
      const auto seed = resolve_seed(ingest_c, cfg);
      StoreLock lock(ingest_store);
      std::optional<MemoryStore> store;
      if (MemoryStore::exists(ingest_store)) {
        store.emplace(MemoryStore::open(ingest_store));
        if (ingest_dim && *ingest_dim != store->dim()) {
          throw Error(ErrorCode::kDimensionMismatch, "--dim " + std::to_string(*ingest_dim) +
                                                         " differs from store dim " +
                                                         std::to_string(store->dim()));
        }
      }
      std::size_t dim = store ? store->dim() : 0;
      take(cfg, "dim", dim);
      if (store) dim = store->dim();
      if (ingest_dim) dim = *ingest_dim;
      auto rr = read_or_fail(ingest_input, dim, ingest_toy, err);
      if (rr.dim == 0) throw Error(ErrorCode::kEmpty, "no records in " + ingest_input);
      if (!store) store.emplace(rr.dim, ingest_h.resolve(cfg, seed));
      if (rr.dim != store->dim()) {
        throw Error(ErrorCode::kDimensionMismatch, "records have dim " + std::to_string(rr.dim) +
                                                       ", store has " + std::to_string(store->dim()));
      }
      assign_entry_ids(rr.dialogues, store->next_id());
      const auto entries = memory_entries(rr.dialogues);
      std::size_t queries = 0;
      for (const auto& q : corpus_queries(rr.dialogues)) queries += q.gold ? 1 : 0;
      store->add_all(entries);
      store->save(ingest_store);
      Output o(ingest_c.output, out);
      o.stream() << canonical_dump({{"ingested", entries.size()},
                                    {"query_records_skipped", queries},
                                    {"records", rr.records},
                                    {"entry_count", store->size()},
                                    {"dim", store->dim()}})
                 << "\n";
      o.finish();
      return kOk;
    }

    if (*query) {
      const Json cfg = load_config(query_c.config_path);
      RetrievalConfig rc = query_r.resolve(cfg);
      const auto store = MemoryStore::open(query_store);
      Query q;
      bool toy = false;
      if (!query_text.empty()) {
        toy = true;
        std::vector<MemoryEntry> history;
        if (!query_dialogue.empty()) {
          for (const auto& [id, e] : store.entries()) {
            if (e.dialogue_id == query_dialogue) history.push_back(e);
          }
          std::sort(history.begin(), history.end(), [](const MemoryEntry& a, const MemoryEntry& b) {
            return std::tie(a.session_id, a.turn_id) < std::tie(b.session_id, b.turn_id);
          });
        }
        auto ann = toy_annotate(query_text, history, "query:");
        q.id = "query";
        q.text = query_text;
        q.entities = std::move(ann.entities);
        q.dep_triples = std::move(ann.dep_triples);
        q.discourse = std::move(ann.discourse);
        q.embedding = toy_embed(query_text, store.dim());
      } else if (!query_record.empty()) {
        std::ifstream in(query_record);
        if (!in) throw UsageError("cannot read " + query_record);
        std::string line;
        while (std::getline(in, line) && trim(line).empty()) {
        }
        const Json j = parse_json(line, query_record + ":1");
        const MemoryEntry e = entry_from_json(j, query_record + ":1");
        AnnotatedTurn t;
        t.entry = e;
        q = query_from_turn(t);
        if (e.embedding.values.empty()) throw Error(ErrorCode::kMalformed, "query record lacks an embedding");
      } else {
        throw UsageError("query needs --text or --record");
      }
      rc.dense_n = std::max(rc.dense_n, std::min(rc.k, store.size()));
      const auto results = retrieve(store, q, rc);
      Output o(query_c.output, out);
      if (query_serialize) {
        if (toy) err << "note: toy-mode query (heuristic annotations)\n";
        o.stream() << serialize_context(results, store, query_budget);
      } else {
        Json rows = Json::array();
        for (std::size_t i = 0; i < results.size(); ++i) {
          const auto& e = store.entry(results[i].entry_id);
          Json r = result_to_json(results[i]);
          r["rank"] = i + 1;
          r["turn"] = turn_label(e);
          r["utterance"] = e.utterance;
          rows.push_back(std::move(r));
        }
        Json report = {{"mode", toy ? "toy" : "record"}, {"results", rows}, {"config", rc.to_json()}};
        if (toy) {
          report["query_annotations"] = {{"entities", entities_to_json(q.entities)},
                                         {"discourse", discourse_to_json(q.discourse)}};
        }
        o.stream() << report.dump(2) << "\n";
      }
      o.finish();
      return kOk;
    }

    if (*tune) {
      const Json cfg = load_config(tune_c.config_path);
      const auto seed = resolve_seed(tune_c, cfg);
      const RetrievalConfig rc = tune_r.resolve(cfg);
      TuneOptions opts;
      const auto& t = section(cfg, "tune");
      take(t, "grid_step", opts.grid_step);
      take(t, "s_min", opts.s_min);
      take(t, "s_max", opts.s_max);
      if (grid_step) opts.grid_step = *grid_step;
      if (s_min) opts.s_min = *s_min;
      if (s_max) opts.s_max = *s_max;
      auto data = load_data(tune_d, cfg, tune_h.resolve(cfg, seed), err);
      const auto result = tune_weights(data.store, data.queries, rc, opts);
      Output o(tune_c.output, out);
      if (tune_json) {
        o.stream() << result.to_json().dump(2) << "\n";
      } else {
        o.stream() << "lambda_s  lambda_e  lambda_c  FR\n";
        for (const auto& p : result.table) {
          o.stream() << fmt(p.weights.lambda_s, 2) << "      " << fmt(p.weights.lambda_e, 2) << "      "
                     << fmt(p.weights.lambda_c, 2) << "      " << fmt(p.fr) << "\n";
        }
        o.stream() << "best " << fmt(result.best.lambda_s, 2) << "," << fmt(result.best.lambda_e, 2) << ","
                   << fmt(result.best.lambda_c, 2) << " FR " << fmt(result.best_fr) << " over "
                   << data.queries.size() << " queries\n";
      }
      o.finish();
      return kOk;
    }

    if (*eval) {
      const Json cfg = load_config(eval_c.config_path);
      const auto seed = resolve_seed(eval_c, cfg);
      const RetrievalConfig rc = eval_r.resolve(cfg);
      auto data = load_data(eval_d, cfg, eval_h.resolve(cfg, seed), err);
      Output o(eval_c.output, out);
      auto dc_text = [](const std::optional<double>& dc) { return dc ? fmt(*dc) : std::string("n/a"); };
      if (eval_ablation) {
        const auto rows = run_ablation(data.store, data.queries, rc);
        if (eval_json) {
          o.stream() << ablation_to_json(rows).dump(2) << "\n";
        } else {
          o.stream() << "variant       FR      dFR      DC      dDC\n";
          for (const auto& r : rows) {
            std::string name = r.variant;
            name.resize(12, ' ');
            o.stream() << name << "  " << fmt(r.report.fr) << "  " << fmt(r.delta_fr) << "  "
                       << dc_text(r.report.dc) << "  " << dc_text(r.delta_dc) << "\n";
          }
        }
      } else {
        const auto report = evaluate(data.store, data.queries, rc, eval_runs);
        if (eval_json) {
          o.stream() << report.to_json().dump(2) << "\n";
        } else {
          o.stream() << "queries " << data.queries.size() << "\n";
          o.stream() << "FR " << fmt(report.fr);
          if (report.fr_std) o.stream() << " (std " << fmt(*report.fr_std) << ")";
          o.stream() << "\nDC " << dc_text(report.dc);
          if (report.dc_std) o.stream() << " (std " << fmt(*report.dc_std) << ")";
          o.stream() << "\nDC excluded queries " << report.dc_excluded << "\n";
        }
      }
      o.finish();
      return kOk;
    }

    if (*sess) {
      const Json cfg = load_config(sess_c.config_path);
      const auto seed = resolve_seed(sess_c, cfg, 0);
      auto rr = read_or_fail(sess_input, 0, sess_toy, err);
      SessionizerConfig sc;
      const auto& sj = section(cfg, "sessionizer");
      take(sj, "turn_budget_min", sc.turn_budget_min);
      take(sj, "turn_budget_max", sc.turn_budget_max);
      take(sj, "gap_hours_choices", sc.gap_hours_choices);
      take(sj, "audit_fraction", sc.audit_fraction);
      sc.rng_seed = seed;
      LongRangeConfig lc;
      const auto& lj = section(cfg, "long_range");
      take(lj, "boundary_min", lc.boundary_min);
      take(lj, "boundary_max", lc.boundary_max);
      take(lj, "retry_limit", lc.retry_limit);
      take(lj, "pronoun_map", lc.pronoun_map);
      lc.rng_seed = seed;
      if (sess_reembed) lc.toy_reembed_dim = *sess_reembed;

      std::vector<BuildResult> built;
      if (sess_mode == "split") {
        built = build_corpus(rr.dialogues, [&](const AnnotatedDialogue& d, EntryId) { return sessionize(d, sc); });
      } else {
        built = build_corpus(rr.dialogues,
                             [&](const AnnotatedDialogue& d, EntryId first) { return extend_long_range(d, lc, first); });
      }
      Corpus result;
      std::size_t boundaries = 0, rewrites = 0;
      for (auto& b : built) {
        for (const auto& w : b.warnings) err << "warning: " << w << "\n";
        for (const auto& r : b.rewrites) {
          err << "rewrite: " << b.dialogue.dialogue_id << " turn " << r.turn_index << " '" << r.from << "' -> '"
              << r.to << "' (" << r.coref_id << ")\n";
        }
        boundaries += b.boundaries.size();
        rewrites += b.rewrites.size();
        result.push_back(std::move(b.dialogue));
      }
      Output o(sess_c.output, out);
      o.stream() << write_annotated(result);
      o.finish();
      if (!sess_c.output.empty()) {
        out << canonical_dump({{"dialogues", result.size()}, {"boundaries", boundaries}, {"rewrites", rewrites}})
            << "\n";
      }
      if (sess_audit) {
        const auto report = audit(result, sc);
        std::ostream& a = sess_c.output.empty() ? err : out;
        for (const auto& r : report.records) a << canonical_dump(r.to_json()) << "\n";
        a << "audit pass fraction " << fmt(report.pass_fraction()) << " (" << report.records.size()
          << " sampled)\n";
      }
      return kOk;
    }

    if (*synth) {
      const Json cfg = load_config(synth_c.config_path);
      SyntheticSpec spec;
      const auto& sj = section(cfg, "synthetic");
      take(sj, "dialogues", spec.dialogues);
      take(sj, "sessions", spec.sessions);
      take(sj, "filler_turns", spec.filler_turns);
      take(sj, "lexical_queries", spec.lexical_queries);
      take(sj, "entity_queries", spec.entity_queries);
      take(sj, "discourse_queries", spec.discourse_queries);
      take(sj, "distractors", spec.distractors);
      take(sj, "gold_distance", spec.gold_distance);
      take(sj, "dim", spec.dim);
      spec.seed = resolve_seed(synth_c, cfg, spec.seed);
      for (const char* name : {"--dialogues", "--sessions", "--fillers", "--lexical", "--entity", "--discourse",
                               "--distractors", "--distance", "--dim"}) {
        if (synth->count(name) == 0) continue;
        const std::string n = name;
        if (n == "--dialogues") spec.dialogues = synth_spec.dialogues;
        if (n == "--sessions") spec.sessions = synth_spec.sessions;
        if (n == "--fillers") spec.filler_turns = synth_spec.filler_turns;
        if (n == "--lexical") spec.lexical_queries = synth_spec.lexical_queries;
        if (n == "--entity") spec.entity_queries = synth_spec.entity_queries;
        if (n == "--discourse") spec.discourse_queries = synth_spec.discourse_queries;
        if (n == "--distractors") spec.distractors = synth_spec.distractors;
        if (n == "--distance") spec.gold_distance = synth_spec.gold_distance;
        if (n == "--dim") spec.dim = synth_spec.dim;
      }
      try {
        spec.validate();
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      Output o(synth_c.output, out);
      o.stream() << write_annotated(make_synthetic(spec));
      o.finish();
      return kOk;
    }

    if (*bench) {
      const Json cfg = load_config(bench_c.config_path);
      const auto seed = resolve_seed(bench_c, cfg);
      const RetrievalConfig rc = bench_r.resolve(cfg);
      std::size_t n = 1000, warmup = 100;
      take(section(cfg, "bench"), "queries", n);
      take(section(cfg, "bench"), "warmup", warmup);
      if (bench_n) n = *bench_n;
      if (bench_warmup) warmup = *bench_warmup;
      auto data = load_data(bench_d, cfg, bench_h.resolve(cfg, seed), err);
      const auto report = latency_bench(data.store, data.queries, rc, warmup, n);
      Output o(bench_c.output, out);
      o.stream() << report.to_json().dump(2) << "\n";
      o.finish();
      return kOk;
    }

    if (*inspect) {
      const auto manifest = MemoryStore::read_manifest(inspect_store);
      const auto store = MemoryStore::open(inspect_store);
      const auto sizes = store.symbolic().key_sizes();
      std::vector<std::pair<std::string, std::size_t>> largest(sizes.begin(), sizes.end());
      std::stable_sort(largest.begin(), largest.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      if (largest.size() > inspect_top) largest.resize(inspect_top);
      std::map<std::string, std::size_t> by_kind;
      for (const auto& [key, n] : sizes) by_kind[key.substr(0, key.find(':'))] += 1;
      Json top = Json::array();
      for (const auto& [key, n] : largest) top.push_back({{"key", key}, {"postings", n}});
      Json report = {{"manifest", manifest.to_json()},
                     {"keys", store.symbolic().key_count()},
                     {"keys_by_kind", by_kind},
                     {"clusters", store.symbolic().cluster_stats().size()},
                     {"mentions", store.symbolic().total_mentions()},
                     {"largest_postings", top}};
      out << report.dump(2) << "\n";
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error (" << error_code_name(e.code()) << "): " << e.what() << "\n";
    return e.code() == ErrorCode::kCorruption ? kCorrupt : kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace lingmem::cli
