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

// Domain types for linguistically structured memory entries and the
// validation rules every stored entry must satisfy.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lingmem/errors.hpp"
#include "lingmem/util.hpp"

namespace lingmem {

using EntryId = std::uint64_t;
inline constexpr EntryId kUnassignedId = std::numeric_limits<EntryId>::max();
inline constexpr std::size_t kDefaultDim = 768;

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

struct EntityMention {
  std::string name;
  std::string coref_id;
  std::string ner_type;
  std::optional<CharSpan> span;

  bool operator==(const EntityMention&) const = default;
};

// Lowercase, trim, and replace the reserved key separator ':' with '_'.
inline std::string normalize_lemma(std::string_view raw) {
  std::string out = to_lower(trim(raw));
  for (auto& c : out) {
    if (c == ':') c = '_';
  }
  return out;
}

struct DependencyTriple {
  std::string head;
  std::string label;
  std::string child;

  static DependencyTriple normalized(std::string_view head, std::string_view label,
                                     std::string_view child) {
    return {normalize_lemma(head), normalize_lemma(label), normalize_lemma(child)};
  }

  bool operator==(const DependencyTriple&) const = default;
};

enum class DiscourseKind {
  kElaboration,
  kContrast,
  kCause,
  kCondition,
  kTemporal,
  kExpansion,
  kOther,
};

class DiscourseLabel {
 public:
  DiscourseLabel() = default;

  // Known tags map onto the coarse set; anything else becomes OTHER and
  // keeps its trimmed spelling.
  static DiscourseLabel parse(std::string_view raw) {
    DiscourseLabel label;
    label.original_ = trim(raw);
    label.key_ = to_upper(label.original_);
    static const std::pair<std::string_view, DiscourseKind> kKnown[] = {
        {"ELABORATION", DiscourseKind::kElaboration},
        {"CONTRAST", DiscourseKind::kContrast},
        {"CAUSE", DiscourseKind::kCause},
        {"CONDITION", DiscourseKind::kCondition},
        {"TEMPORAL", DiscourseKind::kTemporal},
        {"EXPANSION", DiscourseKind::kExpansion},
    };
    label.kind_ = DiscourseKind::kOther;
    for (const auto& [name, kind] : kKnown) {
      if (label.key_ == name) {
        label.kind_ = kind;
        label.original_ = label.key_;
        break;
      }
    }
    return label;
  }

  static DiscourseLabel of(DiscourseKind kind) {
    switch (kind) {
      case DiscourseKind::kElaboration: return parse("ELABORATION");
      case DiscourseKind::kContrast: return parse("CONTRAST");
      case DiscourseKind::kCause: return parse("CAUSE");
      case DiscourseKind::kCondition: return parse("CONDITION");
      case DiscourseKind::kTemporal: return parse("TEMPORAL");
      case DiscourseKind::kExpansion: return parse("EXPANSION");
      case DiscourseKind::kOther: break;
    }
    return parse("OTHER");
  }

  DiscourseKind kind() const { return kind_; }
  // Uppercased identity used for matching and index keys.
  const std::string& key() const { return key_; }
  // Serialized spelling.
  const std::string& name() const { return original_; }

  bool operator==(const DiscourseLabel& o) const { return key_ == o.key_; }
  bool operator<(const DiscourseLabel& o) const { return key_ < o.key_; }

 private:
  DiscourseKind kind_ = DiscourseKind::kOther;
  std::string key_;
  std::string original_;
};

struct Embedding {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const Embedding&) const = default;
};

inline double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "dot: dimension mismatch " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

inline Embedding normalize_embedding(std::span<const float> raw, std::size_t dim) {
  if (raw.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding has " + std::to_string(raw.size()) + " values, expected " +
                    std::to_string(dim));
  }
  for (float x : raw) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidArgument, "non-finite embedding value");
  }
  const double norm = l2_norm(raw);
  if (!(norm > 0.0)) throw Error(ErrorCode::kInvalidArgument, "zero-norm embedding");
  Embedding out;
  out.values.reserve(raw.size());
  for (float x : raw) out.values.push_back(static_cast<float>(static_cast<double>(x) / norm));
  return out;
}

// Tolerance on |norm - 1| for embeddings that claim to be normalized; the
// stored values are single precision.
inline constexpr double kUnitNormTolerance = 1e-4;

struct MemoryEntry {
  EntryId id = kUnassignedId;
  std::string utterance;
  std::string speaker;
  std::string timestamp;
  std::string dialogue_id;
  std::int64_t session_id = 0;
  std::int64_t turn_id = 0;
  std::vector<EntityMention> entities;
  std::vector<DependencyTriple> dep_triples;
  std::vector<DiscourseLabel> discourse;
  Embedding embedding;
};

struct GoldInfo {
  std::vector<EntryId> supporting_entry_ids;
  std::string answer_span;
  std::optional<std::map<std::string, std::string>> coref_assignments;
};

struct Query {
  std::string id;  // free-form label used in reports
  std::string text;
  Embedding embedding;
  std::vector<EntityMention> entities;
  std::vector<DiscourseLabel> discourse;
  // Optional; only consulted when dependency keys are enabled for
  // candidate generation.
  std::vector<DependencyTriple> dep_triples;
  std::optional<GoldInfo> gold;
  // Difficulty class of evaluation queries (lexical | entity | discourse).
  std::string query_class;
};

struct FusionWeights {
  double lambda_s = 0.5;
  double lambda_e = 0.3;
  double lambda_c = 0.2;

  bool valid() const {
    return lambda_s >= 0 && lambda_e >= 0 && lambda_c >= 0 &&
           std::abs(lambda_s + lambda_e + lambda_c - 1.0) <= 1e-9;
  }

  static FusionWeights checked(double s, double e, double c) {
    FusionWeights w{s, e, c};
    if (!w.valid()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "fusion weights must be non-negative and sum to 1");
    }
    return w;
  }

  bool operator==(const FusionWeights&) const = default;
};

struct RankedResult {
  EntryId entry_id = kUnassignedId;
  double score = 0.0;
  double sim_term = 0.0;
  double entity_term = 0.0;
  double discourse_term = 0.0;

  bool operator==(const RankedResult&) const = default;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate_entry(const MemoryEntry& entry,
                                       std::size_t dim = kDefaultDim) {
  ValidationReport report;
  auto add = [&](std::string v) { report.violations.push_back(std::move(v)); };

  for (std::size_t i = 0; i < entry.entities.size(); ++i) {
    const auto& e = entry.entities[i];
    const std::string where = "entity[" + std::to_string(i) + "]: ";
    if (e.name.empty()) add(where + "empty name");
    if (e.coref_id.empty()) add(where + "empty coref_id");
    if (e.span) {
      if (!(e.span->start < e.span->end && e.span->end <= entry.utterance.size())) {
        add(where + "span out of range");
      }
    }
  }

  for (std::size_t i = 0; i < entry.dep_triples.size(); ++i) {
    const auto& t = entry.dep_triples[i];
    const std::string where = "dep_triple[" + std::to_string(i) + "]: ";
    for (const std::string* part : {&t.head, &t.label, &t.child}) {
      if (part->empty()) {
        add(where + "empty field");
      } else if (part->find(':') != std::string::npos) {
        add(where + "separator in lemma");
      } else if (normalize_lemma(*part) != *part) {
        add(where + "lemma not normalized");
      }
    }
  }

  for (std::size_t i = 0; i < entry.discourse.size(); ++i) {
    if (entry.discourse[i].key().empty()) {
      add("discourse[" + std::to_string(i) + "]: empty label");
    }
  }

  const auto& v = entry.embedding.values;
  if (v.size() != dim) {
    add("embedding dimension " + std::to_string(v.size()) + " != " + std::to_string(dim));
  }
  bool finite = true;
  for (float x : v) finite = finite && std::isfinite(x);
  if (!finite) {
    add("non-finite embedding value");
  } else if (!v.empty()) {
    const double norm = l2_norm(v);
    if (norm == 0.0) {
      add("zero-norm embedding");
    } else if (std::abs(norm - 1.0) > kUnitNormTolerance) {
      add("embedding not unit-norm");
    }
  }
  return report;
}

}  // namespace lingmem
