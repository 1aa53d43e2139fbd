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

// Grid search for fusion weights on the simplex, maximizing Factual Recall.
//
// lambda_s and lambda_e step through multiples of `grid_step`, lambda_s is
// restricted to [s_min, s_max], and lambda_c takes the remaining mass.
// Ties go to the larger lambda_s, then the larger lambda_e.

#include <cmath>
#include <span>
#include <vector>

#include "lingmem/errors.hpp"
#include "lingmem/evaluation.hpp"
#include "lingmem/memory_store.hpp"
#include "lingmem/retrieval.hpp"

namespace lingmem {

struct TuneOptions {
  double grid_step = 0.05;
  double s_min = 0.40;
  double s_max = 0.90;
};

struct GridPoint {
  FusionWeights weights;
  std::size_t recalled = 0;
  double fr = 0.0;
};

struct TuneResult {
  FusionWeights best;
  double best_fr = 0.0;
  std::vector<GridPoint> table;

  Json to_json() const {
    Json rows = Json::array();
    for (const auto& p : table) {
      rows.push_back({{"lambda_s", p.weights.lambda_s},
                      {"lambda_e", p.weights.lambda_e},
                      {"lambda_c", p.weights.lambda_c},
                      {"fr", p.fr}});
    }
    return {{"best", {best.lambda_s, best.lambda_e, best.lambda_c}},
            {"best_fr", best_fr},
            {"grid", rows}};
  }
};

inline std::vector<FusionWeights> simplex_grid(const TuneOptions& opts) {
  if (!(opts.grid_step > 0.0) || opts.grid_step > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "grid step must be in (0, 1]");
  }
  constexpr double kEps = 1e-9;
  std::vector<FusionWeights> grid;
  const auto steps = static_cast<long>(std::floor(1.0 / opts.grid_step + kEps));
  for (long i = 0; i <= steps; ++i) {
    const double ls = static_cast<double>(i) * opts.grid_step;
    if (ls < opts.s_min - kEps || ls > opts.s_max + kEps) continue;
    for (long j = 0; j <= steps; ++j) {
      const double le = static_cast<double>(j) * opts.grid_step;
      const double lc = 1.0 - ls - le;
      if (lc < -kEps) break;
      grid.push_back({ls, le, std::max(lc, 0.0)});
    }
  }
  return grid;
}

inline TuneResult tune_weights(const MemoryStore& store, std::span<const Query> queries,
                               const RetrievalConfig& base, const TuneOptions& opts = {}) {
  require_gold(queries);
  if (queries.empty()) throw Error(ErrorCode::kInvalidArgument, "tune: no validation queries");
  const auto grid = simplex_grid(opts);
  if (grid.empty()) throw Error(ErrorCode::kEmpty, "tune: empty weight grid");
  base.validate();

  // Candidate pools and score terms do not depend on the weights, so they
  // are computed once per query and re-weighted per grid point.
  std::vector<std::vector<RankedResult>> terms(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto& q = queries[qi];
    const auto dense_ids = dense_stage(store, q, base);
    const auto symbolic_ids = symbolic_stage(store, q, base);
    RetrievalConfig all = base;
    all.k = dense_ids.size() + symbolic_ids.size() + 1;
    all.dense_n = std::max(all.dense_n, all.k);
    terms[qi] = fusion_stage(store, q, all, dense_ids, symbolic_ids);
  }

  TuneResult out;
  std::size_t best_recalled = 0;
  bool have_best = false;
  for (const auto& w : grid) {
    std::size_t recalled = 0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      std::vector<RankedResult> scored = terms[qi];
      for (auto& r : scored) {
        r.score = w.lambda_s * r.sim_term + w.lambda_e * r.entity_term + w.lambda_c * r.discourse_term;
      }
      rank_results(scored, store);
      if (scored.size() > base.k) scored.resize(base.k);
      if (score_outcome(queries[qi], scored, store).recalled) ++recalled;
    }
    GridPoint p{w, recalled, static_cast<double>(recalled) / static_cast<double>(queries.size())};
    out.table.push_back(p);
    const bool better =
        !have_best || recalled > best_recalled ||
        (recalled == best_recalled &&
         (w.lambda_s > out.best.lambda_s + 1e-12 ||
          (std::abs(w.lambda_s - out.best.lambda_s) <= 1e-12 && w.lambda_e > out.best.lambda_e + 1e-12)));
    if (better) {
      have_best = true;
      best_recalled = recalled;
      out.best = w;
      out.best_fr = p.fr;
    }
  }
  return out;
}

}  // namespace lingmem
