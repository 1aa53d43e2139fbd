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

// Hierarchical navigable small-world graph over unit-norm embeddings.
// Graph construction uses the distance 1 - dot(u, v); results report the
// cosine. An exhaustive scan with the same result contract serves as the
// exact mode and as a test oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <queue>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lingmem/binary_io.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/memory_model.hpp"
#include "lingmem/util.hpp"

namespace lingmem {

struct HnswParams {
  std::uint32_t m = 32;
  std::uint32_t ef_construction = 200;
  std::uint32_t ef_search = 128;
  std::uint64_t seed = 42;

  void validate() const {
    if (m < 2) throw Error(ErrorCode::kInvalidArgument, "hnsw: m must be >= 2");
    if (ef_construction < m) throw Error(ErrorCode::kInvalidArgument, "hnsw: ef_construction must be >= m");
    if (ef_search < 1) throw Error(ErrorCode::kInvalidArgument, "hnsw: ef_search must be >= 1");
  }

  bool operator==(const HnswParams&) const = default;
};

struct DenseHit {
  EntryId id = kUnassignedId;
  double cosine = 0.0;

  bool operator==(const DenseHit&) const = default;
};

struct SearchStats {
  std::size_t distance_evals = 0;
};

// Orders hits by (cosine desc, id asc).
inline bool hit_before(const DenseHit& a, const DenseHit& b) {
  if (a.cosine != b.cosine) return a.cosine > b.cosine;
  return a.id < b.id;
}

class DenseIndex {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;
  static constexpr std::string_view kMagic = "LMDENSE1";

  explicit DenseIndex(std::size_t dim = kDefaultDim, HnswParams params = {})
      : dim_(dim), params_(params) {
    params_.validate();
    if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "dense index: dim must be positive");
    level_mult_ = 1.0 / std::log(static_cast<double>(params_.m));
  }

  DenseIndex(const DenseIndex& o) { copy_from(o); }
  DenseIndex& operator=(const DenseIndex& o) {
    if (this != &o) copy_from(o);
    return *this;
  }

  std::size_t dim() const { return dim_; }
  const HnswParams& params() const { return params_; }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return live_;
  }

  bool contains(EntryId id) const {
    std::shared_lock lock(mutex_);
    auto it = by_id_.find(id);
    return it != by_id_.end() && !nodes_[it->second].deleted;
  }

  void insert(EntryId id, const Embedding& embedding) {
    if (embedding.dim() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch, "dense insert: expected dim " + std::to_string(dim_) +
                                                     ", got " + std::to_string(embedding.dim()));
    }
    std::unique_lock lock(mutex_);
    if (by_id_.count(id)) {
      throw Error(ErrorCode::kDuplicate, "dense insert: duplicate entry id " + std::to_string(id));
    }
    insert_locked(id, embedding.values);
  }

  // Tombstones an entry; it stays in the graph for routing until rebuild().
  bool remove(EntryId id) {
    std::unique_lock lock(mutex_);
    auto it = by_id_.find(id);
    if (it == by_id_.end() || nodes_[it->second].deleted) return false;
    nodes_[it->second].deleted = true;
    --live_;
    return true;
  }

  // Rebuilds the graph from the live entries in their original order.
  void rebuild() {
    std::unique_lock lock(mutex_);
    auto old_nodes = std::move(nodes_);
    auto old_vectors = std::move(vectors_);
    reset_locked();
    for (std::size_t i = 0; i < old_nodes.size(); ++i) {
      if (old_nodes[i].deleted) continue;
      insert_locked(old_nodes[i].id,
                    std::span<const float>(old_vectors.data() + i * dim_, dim_));
    }
  }

  std::vector<DenseHit> search(std::span<const float> query, std::size_t n,
                               SearchStats* stats = nullptr,
                               std::optional<std::size_t> ef = std::nullopt) const {
    check_query(query, n);
    std::shared_lock lock(mutex_);
    if (live_ == 0) throw Error(ErrorCode::kEmpty, "dense search: empty index");
    SearchStats local;
    std::uint32_t cur = static_cast<std::uint32_t>(entry_point_);
    float cur_dist = distance(query, cur);
    ++local.distance_evals;
    for (int level = max_level_; level > 0; --level) {
      greedy_descend(query, cur, cur_dist, level, local);
    }
    const std::size_t beam = std::max<std::size_t>(ef.value_or(params_.ef_search), n);
    auto found = search_layer(query, {{cur_dist, cur}}, beam, 0, /*skip_deleted=*/true, local);
    std::vector<DenseHit> hits;
    hits.reserve(found.size());
    for (const auto& [d, node] : found) {
      hits.push_back({nodes_[node].id, dot(query, vector_of(node))});
    }
    std::sort(hits.begin(), hits.end(), hit_before);
    if (hits.size() > n) hits.resize(n);
    if (stats) *stats = local;
    return hits;
  }

  std::vector<DenseHit> search_exact(std::span<const float> query, std::size_t n) const {
    check_query(query, n);
    std::shared_lock lock(mutex_);
    if (live_ == 0) throw Error(ErrorCode::kEmpty, "dense search: empty index");
    std::vector<DenseHit> hits;
    hits.reserve(live_);
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      if (!nodes_[i].deleted) hits.push_back({nodes_[i].id, dot(query, vector_of(i))});
    }
    const std::size_t keep = std::min(n, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      hit_before);
    hits.resize(keep);
    return hits;
  }

  // Stored (normalized) vector of an entry.
  std::vector<float> stored_vector(EntryId id) const {
    std::shared_lock lock(mutex_);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw Error(ErrorCode::kNotFound, "dense: unknown id " + std::to_string(id));
    auto v = vector_of(it->second);
    return {v.begin(), v.end()};
  }

  std::vector<std::uint8_t> serialize() const {
    std::shared_lock lock(mutex_);
    ByteWriter w;
    w.bytes(kMagic);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(dim_));
    w.u32(params_.m);
    w.u32(params_.ef_construction);
    w.u32(params_.ef_search);
    w.u64(params_.seed);
    w.u64(nodes_.size());
    w.u64(entry_point_ < 0 ? UINT64_MAX : static_cast<std::uint64_t>(entry_point_));
    w.u32(static_cast<std::uint32_t>(max_level_ + 1));
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      const auto& node = nodes_[i];
      w.u64(node.id);
      w.u8(node.deleted ? 1 : 0);
      w.u32(static_cast<std::uint32_t>(node.links.size()));
      for (float x : vector_of(i)) w.f32(x);
      for (const auto& level : node.links) {
        w.u32(static_cast<std::uint32_t>(level.size()));
        for (auto nb : level) w.u32(nb);
      }
    }
    w.seal();
    return w.data();
  }

  static DenseIndex deserialize(std::span<const std::uint8_t> bytes,
                                const std::string& name = "dense segment") {
    ByteReader r(bytes.data(), bytes.size(), name);
    r.verify_seal();
    if (r.bytes(kMagic.size()) != kMagic) r.corrupt("bad magic");
    if (r.u32() != kFormatVersion) r.corrupt("unsupported version");
    const std::size_t dim = r.u32();
    HnswParams p;
    p.m = r.u32();
    p.ef_construction = r.u32();
    p.ef_search = r.u32();
    p.seed = r.u64();
    DenseIndex index(dim, p);
    const std::uint64_t count = r.u64();
    const std::uint64_t entry = r.u64();
    index.max_level_ = static_cast<int>(r.u32()) - 1;
    index.entry_point_ = entry == UINT64_MAX ? -1 : static_cast<std::int64_t>(entry);
    for (std::uint64_t i = 0; i < count; ++i) {
      Node node;
      node.id = r.u64();
      node.deleted = r.u8() != 0;
      const std::uint32_t levels = r.u32();
      if (levels == 0 || levels > 64) r.corrupt("bad node level");
      for (std::size_t k = 0; k < dim; ++k) index.vectors_.push_back(r.f32());
      node.links.resize(levels);
      for (auto& level : node.links) {
        const std::uint32_t n = r.u32();
        level.reserve(n);
        for (std::uint32_t k = 0; k < n; ++k) {
          const std::uint32_t nb = r.u32();
          if (nb >= count) r.corrupt("neighbor out of range");
          level.push_back(nb);
        }
      }
      if (!index.by_id_.emplace(node.id, static_cast<std::uint32_t>(i)).second) {
        r.corrupt("duplicate entry id");
      }
      if (!node.deleted) ++index.live_;
      index.nodes_.push_back(std::move(node));
    }
    r.expect_end();
    if (index.entry_point_ >= static_cast<std::int64_t>(count)) r.corrupt("bad entry point");
    return index;
  }

 private:
  struct Node {
    EntryId id = kUnassignedId;
    bool deleted = false;
    std::vector<std::vector<std::uint32_t>> links;  // one list per level
  };

  // (distance, node); pair ordering makes every heap deterministic.
  using Cand = std::pair<float, std::uint32_t>;

  void copy_from(const DenseIndex& o) {
    std::shared_lock lock(o.mutex_);
    dim_ = o.dim_;
    params_ = o.params_;
    level_mult_ = o.level_mult_;
    vectors_ = o.vectors_;
    nodes_ = o.nodes_;
    by_id_ = o.by_id_;
    entry_point_ = o.entry_point_;
    max_level_ = o.max_level_;
    live_ = o.live_;
  }

  void reset_locked() {
    nodes_.clear();
    vectors_.clear();
    by_id_.clear();
    entry_point_ = -1;
    max_level_ = -1;
    live_ = 0;
  }

  void check_query(std::span<const float> query, std::size_t n) const {
    if (query.size() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch, "dense search: expected dim " + std::to_string(dim_) +
                                                     ", got " + std::to_string(query.size()));
    }
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "dense search: n must be >= 1");
  }

  std::span<const float> vector_of(std::uint32_t node) const {
    return {vectors_.data() + static_cast<std::size_t>(node) * dim_, dim_};
  }

  float distance(std::span<const float> q, std::uint32_t node) const {
    const float* v = vectors_.data() + static_cast<std::size_t>(node) * dim_;
    float sum = 0.0f;
    for (std::size_t i = 0; i < dim_; ++i) sum += q[i] * v[i];
    return 1.0f - sum;
  }

  float distance(std::uint32_t a, std::uint32_t b) const { return distance(vector_of(a), b); }

  std::size_t max_links(int level) const { return level == 0 ? 2 * params_.m : params_.m; }

  int draw_level(EntryId id) const {
    const std::uint64_t h = splitmix64(params_.seed ^ splitmix64(id));
    const double u = (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const int level = static_cast<int>(std::floor(-std::log(u) * level_mult_));
    return std::min(level, 16);
  }

  void greedy_descend(std::span<const float> q, std::uint32_t& cur, float& cur_dist, int level,
                      SearchStats& stats) const {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto nb : nodes_[cur].links[static_cast<std::size_t>(level)]) {
        const float d = distance(q, nb);
        ++stats.distance_evals;
        if (Cand{d, nb} < Cand{cur_dist, cur}) {
          cur = nb;
          cur_dist = d;
          changed = true;
        }
      }
    }
  }

  // Beam search on one level. Returns up to `ef` nodes sorted by distance.
  // Exploration only stops once the beam is full, so a beam at least as
  // large as the graph visits every reachable node.
  std::vector<Cand> search_layer(std::span<const float> q, std::vector<Cand> entry_points,
                                 std::size_t ef, int level, bool skip_deleted,
                                 SearchStats& stats) const {
    std::vector<bool> visited(nodes_.size(), false);
    std::priority_queue<Cand, std::vector<Cand>, std::greater<>> frontier;
    std::priority_queue<Cand> best;
    for (const auto& c : entry_points) {
      if (visited[c.second]) continue;
      visited[c.second] = true;
      frontier.push(c);
      if (!(skip_deleted && nodes_[c.second].deleted)) best.push(c);
    }
    while (best.size() > ef) best.pop();
    while (!frontier.empty()) {
      const Cand c = frontier.top();
      if (best.size() >= ef && c > best.top()) break;
      frontier.pop();
      for (auto nb : nodes_[c.second].links[static_cast<std::size_t>(level)]) {
        if (visited[nb]) continue;
        visited[nb] = true;
        const Cand cand{distance(q, nb), nb};
        ++stats.distance_evals;
        if (best.size() < ef || cand < best.top()) {
          frontier.push(cand);
          if (!(skip_deleted && nodes_[nb].deleted)) {
            best.push(cand);
            if (best.size() > ef) best.pop();
          }
        }
      }
    }
    std::vector<Cand> out;
    out.reserve(best.size());
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Diversity heuristic: keep a candidate only if it is closer to the base
  // than to every neighbor already kept; top up with pruned candidates.
  std::vector<std::uint32_t> select_neighbors(const std::vector<Cand>& sorted_cands,
                                              std::size_t limit) const {
    std::vector<std::uint32_t> kept;
    std::vector<std::uint32_t> pruned;
    for (const auto& [d, node] : sorted_cands) {
      if (kept.size() >= limit) break;
      bool diverse = true;
      for (auto k : kept) {
        if (distance(node, k) < d) {
          diverse = false;
          break;
        }
      }
      (diverse ? kept : pruned).push_back(node);
    }
    for (auto node : pruned) {
      if (kept.size() >= limit) break;
      kept.push_back(node);
    }
    return kept;
  }

  void insert_locked(EntryId id, std::span<const float> values) {
    const auto node = static_cast<std::uint32_t>(nodes_.size());
    const int level = draw_level(id);
    vectors_.insert(vectors_.end(), values.begin(), values.end());
    Node n;
    n.id = id;
    n.links.resize(static_cast<std::size_t>(level) + 1);
    nodes_.push_back(std::move(n));
    by_id_.emplace(id, node);
    ++live_;

    if (entry_point_ < 0) {
      entry_point_ = node;
      max_level_ = level;
      return;
    }
    const auto q = vector_of(node);
    SearchStats ignored;
    std::uint32_t cur = static_cast<std::uint32_t>(entry_point_);
    float cur_dist = distance(q, cur);
    for (int l = max_level_; l > level; --l) greedy_descend(q, cur, cur_dist, l, ignored);

    std::vector<Cand> eps{{cur_dist, cur}};
    for (int l = std::min(level, max_level_); l >= 0; --l) {
      auto found = search_layer(q, eps, params_.ef_construction, l, false, ignored);
      auto neighbors = select_neighbors(found, params_.m);
      nodes_[node].links[static_cast<std::size_t>(l)] = neighbors;
      for (auto nb : neighbors) link_back(nb, node, l);
      eps = std::move(found);
    }
    if (level > max_level_) {
      max_level_ = level;
      entry_point_ = node;
    }
  }

  void link_back(std::uint32_t from, std::uint32_t to, int level) {
    auto& links = nodes_[from].links[static_cast<std::size_t>(level)];
    links.push_back(to);
    const std::size_t limit = max_links(level);
    if (links.size() <= limit) return;
    std::vector<Cand> cands;
    cands.reserve(links.size());
    for (auto nb : links) cands.push_back({distance(from, nb), nb});
    std::sort(cands.begin(), cands.end());
    links = select_neighbors(cands, limit);
  }

  std::size_t dim_ = kDefaultDim;
  HnswParams params_;
  double level_mult_ = 1.0;
  std::vector<float> vectors_;
  std::vector<Node> nodes_;
  std::unordered_map<EntryId, std::uint32_t> by_id_;
  std::int64_t entry_point_ = -1;
  int max_level_ = -1;
  std::size_t live_ = 0;
  mutable std::shared_mutex mutex_;
};

}  // namespace lingmem
