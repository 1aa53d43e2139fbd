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

// The hybrid memory store: entry table + dense index + symbolic index,
// with an on-disk directory layout
//
//   manifest.json   format version, dim, HNSW params, counts, checksums
//   entries.jsonl   entry log, one canonical record per entry (with id)
//   dense.seg       serialized HNSW graph
//   symbolic.seg    key directory, posting segment, cluster statistics
//
// Files are replaced write-temp-then-rename, manifest last. Opening a store
// verifies every checksum and refuses on mismatch.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lingmem/annotation.hpp"
#include "lingmem/binary_io.hpp"
#include "lingmem/canonical_json.hpp"
#include "lingmem/dense_index.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/memory_model.hpp"
#include "lingmem/symbolic_index.hpp"

namespace lingmem {

inline constexpr std::uint32_t kStoreFormatVersion = 1;

struct StoreManifest {
  std::uint32_t format_version = kStoreFormatVersion;
  std::size_t dim = kDefaultDim;
  HnswParams hnsw;
  std::size_t entry_count = 0;
  EntryId next_id = 0;
  std::map<std::string, std::string> checksums;  // file name -> crc32 hex
  std::string created;
  std::string config_fingerprint;

  Json to_json() const {
    return {{"format_version", format_version},
            {"dim", dim},
            {"hnsw",
             {{"m", hnsw.m},
              {"ef_construction", hnsw.ef_construction},
              {"ef_search", hnsw.ef_search},
              {"seed", hnsw.seed}}},
            {"entry_count", entry_count},
            {"next_id", next_id},
            {"checksums", checksums},
            {"created", created},
            {"config_fingerprint", config_fingerprint}};
  }

  static StoreManifest from_json(const Json& j) {
    try {
      StoreManifest m;
      m.format_version = j.at("format_version").get<std::uint32_t>();
      m.dim = j.at("dim").get<std::size_t>();
      const auto& h = j.at("hnsw");
      m.hnsw.m = h.at("m").get<std::uint32_t>();
      m.hnsw.ef_construction = h.at("ef_construction").get<std::uint32_t>();
      m.hnsw.ef_search = h.at("ef_search").get<std::uint32_t>();
      m.hnsw.seed = h.at("seed").get<std::uint64_t>();
      m.entry_count = j.at("entry_count").get<std::size_t>();
      m.next_id = j.at("next_id").get<EntryId>();
      m.checksums = j.at("checksums").get<std::map<std::string, std::string>>();
      m.created = j.value("created", "");
      m.config_fingerprint = j.value("config_fingerprint", "");
      return m;
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kCorruption, std::string("manifest: ") + e.what());
    }
  }
};

inline std::string config_fingerprint(std::size_t dim, const HnswParams& p) {
  const Json j = {{"dim", dim},
                  {"m", p.m},
                  {"ef_construction", p.ef_construction},
                  {"ef_search", p.ef_search},
                  {"seed", p.seed}};
  return hex64(fnv1a64(canonical_dump(j)));
}

inline std::string utc_timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string crc_hex(std::uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

// Exclusive writer lock on a store directory, held for the object's
// lifetime.
class StoreLock {
 public:
  explicit StoreLock(const std::filesystem::path& dir) : path_(dir / "LOCK") {
    std::filesystem::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw Error(ErrorCode::kIo, "store is locked by another writer: " + path_.string());
    std::fclose(f);
  }
  ~StoreLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  std::filesystem::path path_;
};

class MemoryStore {
 public:
  static constexpr const char* kManifestFile = "manifest.json";
  static constexpr const char* kEntriesFile = "entries.jsonl";
  static constexpr const char* kDenseFile = "dense.seg";
  static constexpr const char* kSymbolicFile = "symbolic.seg";

  explicit MemoryStore(std::size_t dim = kDefaultDim, HnswParams params = {})
      : dim_(dim), dense_(dim, params) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  EntryId next_id() const { return next_id_; }
  const HnswParams& hnsw_params() const { return dense_.params(); }

  const DenseIndex& dense() const { return dense_; }
  const SymbolicIndex& symbolic() const { return symbolic_; }
  const std::map<EntryId, MemoryEntry>& entries() const { return entries_; }

  const MemoryEntry* find(EntryId id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const MemoryEntry& entry(EntryId id) const {
    if (const auto* e = find(id)) return *e;
    throw Error(ErrorCode::kNotFound, "unknown entry id " + std::to_string(id));
  }

  bool has_key(const std::string& dialogue_id, std::int64_t session_id, std::int64_t turn_id) const {
    return keys_.count({dialogue_id, session_id, turn_id}) > 0;
  }

  // Validates every entry first; the store is unchanged if any fails.
  // Entries without an id get consecutive ids from next_id().
  std::vector<EntryId> add_all(std::vector<MemoryEntry> batch) {
    std::set<Key> batch_keys;
    std::set<EntryId> batch_ids;
    EntryId next = next_id_;
    for (auto& e : batch) {
      const auto report = validate_entry(e, dim_);
      if (!report.ok()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "invalid entry " + turn_label(e) + ": " + report.violations.front());
      }
      const Key key{e.dialogue_id, e.session_id, e.turn_id};
      if (keys_.count(key) || !batch_keys.insert(key).second) {
        throw Error(ErrorCode::kDuplicate, "duplicate (dialogue_id, session_id, turn_id) " + turn_label(e));
      }
      if (e.id == kUnassignedId) e.id = next;
      if (entries_.count(e.id) || !batch_ids.insert(e.id).second) {
        throw Error(ErrorCode::kDuplicate, "duplicate entry id " + std::to_string(e.id));
      }
      next = std::max(next, e.id + 1);
    }
    std::vector<EntryId> ids;
    ids.reserve(batch.size());
    for (auto& e : batch) {
      dense_.insert(e.id, e.embedding);
      symbolic_.insert(e);
      keys_.insert({e.dialogue_id, e.session_id, e.turn_id});
      ids.push_back(e.id);
      entries_.emplace(e.id, std::move(e));
    }
    next_id_ = next;
    return ids;
  }

  EntryId add(MemoryEntry e) { return add_all({std::move(e)}).front(); }

  // Builds a store from the memory turns of a corpus, assigning ids in
  // corpus order starting at 0.
  static MemoryStore from_corpus(const Corpus& corpus, std::size_t dim, HnswParams params = {}) {
    MemoryStore store(dim, params);
    store.add_all(memory_entries(corpus));
    return store;
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ostringstream log;
    for (const auto& [id, e] : entries_) log << canonical_dump(entry_to_json(e)) << '\n';
    const std::string log_text = log.str();
    const auto dense_bytes = dense_.serialize();
    const auto symbolic_bytes = symbolic_.serialize();

    StoreManifest m;
    m.dim = dim_;
    m.hnsw = dense_.params();
    m.entry_count = entries_.size();
    m.next_id = next_id_;
    m.checksums[kEntriesFile] = crc_hex(crc32_of(log_text));
    m.checksums[kDenseFile] = crc_hex(crc32_of(dense_bytes.data(), dense_bytes.size()));
    m.checksums[kSymbolicFile] = crc_hex(crc32_of(symbolic_bytes.data(), symbolic_bytes.size()));
    m.config_fingerprint = config_fingerprint(dim_, m.hnsw);
    m.created = utc_timestamp_now();
    if (std::filesystem::exists(dir / kManifestFile)) {
      try {
        m.created = read_manifest(dir).created;
      } catch (const Error&) {
      }
    }

    write_file_atomic(dir / kEntriesFile, log_text);
    write_file_atomic(dir / kDenseFile, dense_bytes.data(), dense_bytes.size());
    write_file_atomic(dir / kSymbolicFile, symbolic_bytes.data(), symbolic_bytes.size());
    write_file_atomic(dir / kManifestFile, canonical_dump(m.to_json()) + "\n");
  }

  static bool exists(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / kManifestFile);
  }

  static StoreManifest read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / kManifestFile;
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kNotFound, "no store at " + dir.string());
    }
    const auto bytes = read_file_bytes(path);
    Json j;
    try {
      j = Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kCorruption, "manifest: " + std::string(e.what()));
    }
    auto m = StoreManifest::from_json(j);
    if (m.format_version != kStoreFormatVersion) {
      throw Error(ErrorCode::kCorruption, "manifest: unsupported format version " +
                                              std::to_string(m.format_version));
    }
    return m;
  }

  static MemoryStore open(const std::filesystem::path& dir) {
    const StoreManifest m = read_manifest(dir);
    auto load = [&](const char* name) {
      auto it = m.checksums.find(name);
      if (it == m.checksums.end()) {
        throw Error(ErrorCode::kCorruption, std::string("manifest lacks checksum for ") + name);
      }
      auto bytes = read_file_bytes(dir / name);
      if (crc_hex(crc32_of(bytes.data(), bytes.size())) != it->second) {
        throw Error(ErrorCode::kCorruption, std::string(name) + ": checksum mismatch");
      }
      return bytes;
    };
    const auto log_bytes = load(kEntriesFile);
    const auto dense_bytes = load(kDenseFile);
    const auto symbolic_bytes = load(kSymbolicFile);

    MemoryStore store(m.dim, m.hnsw);
    store.dense_ = DenseIndex::deserialize(dense_bytes, kDenseFile);
    store.symbolic_ = SymbolicIndex::deserialize(symbolic_bytes, kSymbolicFile);
    if (store.dense_.dim() != m.dim) throw Error(ErrorCode::kCorruption, "dense segment dim mismatch");

    std::istringstream log(std::string(log_bytes.begin(), log_bytes.end()));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(log, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where = std::string(kEntriesFile) + ":" + std::to_string(line_no);
      MemoryEntry e;
      try {
        e = entry_from_json(parse_json(line, where), where);
      } catch (const Error& err) {
        throw Error(ErrorCode::kCorruption, err.what());
      }
      if (e.id == kUnassignedId) throw Error(ErrorCode::kCorruption, where + ": entry without id");
      store.keys_.insert({e.dialogue_id, e.session_id, e.turn_id});
      store.entries_.emplace(e.id, std::move(e));
    }
    if (store.entries_.size() != m.entry_count || store.dense_.size() != m.entry_count ||
        store.symbolic_.size() != m.entry_count) {
      throw Error(ErrorCode::kCorruption, "segment entry counts disagree with manifest");
    }
    store.next_id_ = m.next_id;
    return store;
  }

 private:
  using Key = std::tuple<std::string, std::int64_t, std::int64_t>;

  std::size_t dim_;
  DenseIndex dense_;
  SymbolicIndex symbolic_;
  std::map<EntryId, MemoryEntry> entries_;
  std::set<Key> keys_;
  EntryId next_id_ = 0;
};

}  // namespace lingmem
