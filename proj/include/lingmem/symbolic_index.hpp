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

// Inverted index over the symbolic features of memory entries. Keys:
//   coref:<coref_id>   name:<lowercased surface name>
//   dep:<head>:<label>:<child>   disc:<LABEL>
// Posting lists are sorted, duplicate-free entry ids. Cluster statistics
// count stored mentions per coreference id.

#include <algorithm>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "lingmem/binary_io.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/memory_model.hpp"
#include "lingmem/util.hpp"

namespace lingmem {

struct SymbolicKeyOptions {
  bool use_coref = true;
  bool use_names = true;
  bool use_discourse = true;
  bool use_deps = true;
};

inline std::string coref_key(const std::string& id) { return "coref:" + id; }
inline std::string name_key(const std::string& name) { return "name:" + to_lower(name); }
inline std::string dep_key(const DependencyTriple& t) {
  return "dep:" + t.head + ":" + t.label + ":" + t.child;
}
inline std::string disc_key(const DiscourseLabel& l) { return "disc:" + l.key(); }

inline std::set<std::string> entry_keys(const MemoryEntry& e) {
  std::set<std::string> keys;
  for (const auto& m : e.entities) {
    keys.insert(coref_key(m.coref_id));
    keys.insert(name_key(m.name));
  }
  for (const auto& t : e.dep_triples) keys.insert(dep_key(t));
  for (const auto& l : e.discourse) keys.insert(disc_key(l));
  return keys;
}

inline std::set<std::string> query_keys(const Query& q, const SymbolicKeyOptions& opts = {}) {
  std::set<std::string> keys;
  for (const auto& m : q.entities) {
    if (opts.use_coref) keys.insert(coref_key(m.coref_id));
    if (opts.use_names) keys.insert(name_key(m.name));
  }
  if (opts.use_discourse) {
    for (const auto& l : q.discourse) keys.insert(disc_key(l));
  }
  if (opts.use_deps) {
    for (const auto& t : q.dep_triples) keys.insert(dep_key(t));
  }
  return keys;
}

class SymbolicIndex {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;
  static constexpr std::string_view kMagic = "LMSYMB01";

  SymbolicIndex() = default;
  SymbolicIndex(const SymbolicIndex& o) { copy_from(o); }
  SymbolicIndex& operator=(const SymbolicIndex& o) {
    if (this != &o) copy_from(o);
    return *this;
  }

  void insert(const MemoryEntry& entry) {
    std::unique_lock lock(mutex_);
    if (!registry_.insert(entry.id).second) {
      throw Error(ErrorCode::kDuplicate, "symbolic insert: duplicate entry id " + std::to_string(entry.id));
    }
    for (const auto& key : entry_keys(entry)) {
      auto& list = postings_[key];
      if (list.empty() || list.back() < entry.id) {
        list.push_back(entry.id);
      } else {
        list.insert(std::lower_bound(list.begin(), list.end(), entry.id), entry.id);
      }
    }
    for (const auto& m : entry.entities) {
      ++clusters_[m.coref_id];
      ++total_mentions_;
    }
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return registry_.size();
  }

  bool contains(EntryId id) const {
    std::shared_lock lock(mutex_);
    return registry_.count(id) > 0;
  }

  std::vector<EntryId> postings(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = postings_.find(key);
    return it == postings_.end() ? std::vector<EntryId>{} : it->second;
  }

  std::size_t cluster_size(const std::string& coref_id) const {
    std::shared_lock lock(mutex_);
    auto it = clusters_.find(coref_id);
    return it == clusters_.end() ? 0 : it->second;
  }

  std::map<std::string, std::size_t> cluster_stats() const {
    std::shared_lock lock(mutex_);
    return clusters_;
  }

  std::size_t total_mentions() const {
    std::shared_lock lock(mutex_);
    return total_mentions_;
  }

  std::size_t key_count() const {
    std::shared_lock lock(mutex_);
    return postings_.size();
  }

  // Key -> posting length, for inspection.
  std::map<std::string, std::size_t> key_sizes() const {
    std::shared_lock lock(mutex_);
    std::map<std::string, std::size_t> out;
    for (const auto& [k, v] : postings_) out.emplace(k, v.size());
    return out;
  }

  // Union of the posting lists for the query's keys. Keys are consumed
  // rarest first; the list that crosses `cap` contributes its lowest ids.
  std::vector<EntryId> candidates(const Query& query, std::size_t cap,
                                  const SymbolicKeyOptions& opts = {}) const {
    std::shared_lock lock(mutex_);
    std::vector<const std::pair<const std::string, std::vector<EntryId>>*> lists;
    for (const auto& key : query_keys(query, opts)) {
      auto it = postings_.find(key);
      if (it != postings_.end()) lists.push_back(&*it);
    }
    std::sort(lists.begin(), lists.end(), [](auto* a, auto* b) {
      if (a->second.size() != b->second.size()) return a->second.size() < b->second.size();
      return a->first < b->first;
    });
    std::set<EntryId> pool;
    for (const auto* list : lists) {
      if (pool.size() >= cap) break;
      for (EntryId id : list->second) {
        if (pool.size() >= cap) break;
        pool.insert(id);
      }
    }
    return {pool.begin(), pool.end()};
  }

  std::vector<std::uint8_t> serialize() const {
    std::shared_lock lock(mutex_);
    ByteWriter w;
    w.bytes(kMagic);
    w.u32(kFormatVersion);
    w.u64(registry_.size());
    for (EntryId id : registry_) w.u64(id);
    // Key directory, then the concatenated posting segment.
    w.u64(postings_.size());
    std::uint64_t offset = 0;
    for (const auto& [key, ids] : postings_) {
      w.str(key);
      w.u64(offset);
      w.u64(ids.size());
      offset += ids.size();
    }
    for (const auto& [key, ids] : postings_) {
      for (EntryId id : ids) w.u64(id);
    }
    w.u64(clusters_.size());
    for (const auto& [id, n] : clusters_) {
      w.str(id);
      w.u64(n);
    }
    w.seal();
    return w.data();
  }

  static SymbolicIndex deserialize(std::span<const std::uint8_t> bytes,
                                   const std::string& name = "symbolic segment") {
    ByteReader r(bytes.data(), bytes.size(), name);
    r.verify_seal();
    if (r.bytes(kMagic.size()) != kMagic) r.corrupt("bad magic");
    if (r.u32() != kFormatVersion) r.corrupt("unsupported version");
    SymbolicIndex index;
    const std::uint64_t n_ids = r.u64();
    for (std::uint64_t i = 0; i < n_ids; ++i) index.registry_.insert(r.u64());
    const std::uint64_t n_keys = r.u64();
    std::vector<std::pair<std::string, std::uint64_t>> directory;
    std::uint64_t expected_offset = 0;
    for (std::uint64_t i = 0; i < n_keys; ++i) {
      std::string key = r.str();
      const std::uint64_t offset = r.u64();
      const std::uint64_t length = r.u64();
      if (offset != expected_offset) r.corrupt("posting directory out of order");
      if (!directory.empty() && !(directory.back().first < key)) r.corrupt("key directory not sorted");
      expected_offset += length;
      directory.emplace_back(std::move(key), length);
    }
    for (const auto& [key, length] : directory) {
      std::vector<EntryId> ids;
      ids.reserve(length);
      for (std::uint64_t i = 0; i < length; ++i) {
        const EntryId id = r.u64();
        if (!ids.empty() && ids.back() >= id) r.corrupt("posting list not sorted");
        ids.push_back(id);
      }
      index.postings_.emplace(key, std::move(ids));
    }
    const std::uint64_t n_clusters = r.u64();
    for (std::uint64_t i = 0; i < n_clusters; ++i) {
      std::string id = r.str();
      const std::uint64_t n = r.u64();
      index.total_mentions_ += n;
      index.clusters_.emplace(std::move(id), n);
    }
    r.expect_end();
    return index;
  }

 private:
  void copy_from(const SymbolicIndex& o) {
    std::shared_lock lock(o.mutex_);
    registry_ = o.registry_;
    postings_ = o.postings_;
    clusters_ = o.clusters_;
    total_mentions_ = o.total_mentions_;
  }

  std::set<EntryId> registry_;
  std::map<std::string, std::vector<EntryId>> postings_;
  std::map<std::string, std::size_t> clusters_;
  std::size_t total_mentions_ = 0;
  mutable std::shared_mutex mutex_;
};

}  // namespace lingmem
