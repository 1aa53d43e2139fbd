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

// Deterministic stand-ins for the linguistic pipeline: a heuristic
// annotator (capitalized spans, recency pronoun linking, adjacency triples,
// cue-word discourse labels) and a hashed n-gram embedder. They exist so the
// engine can be exercised end to end without any model runtime; accuracy
// is not a goal.

#include <cctype>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lingmem/errors.hpp"
#include "lingmem/memory_model.hpp"
#include "lingmem/util.hpp"

namespace lingmem {

struct ToyAnnotation {
  std::vector<EntityMention> entities;
  std::vector<DependencyTriple> dep_triples;
  std::vector<DiscourseLabel> discourse;
};

namespace toy {

struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  bool sentence_initial = false;
};

inline bool is_title(std::string_view lower) {
  return lower == "dr" || lower == "mr" || lower == "mrs" || lower == "ms" ||
         lower == "st" || lower == "prof";
}

inline bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

// Splits into word tokens. Apostrophes and hyphens are kept inside words,
// a period directly after a title ("Dr.") stays attached, and ".!?" mark
// the next token as sentence initial.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  bool at_sentence_start = true;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (!is_word_byte(c)) {
      if (c == '.' || c == '!' || c == '?') at_sentence_start = true;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size()) {
      const auto d = static_cast<unsigned char>(text[j]);
      if (is_word_byte(d)) {
        ++j;
      } else if ((d == '\'' || d == '-') && j + 1 < text.size() &&
                 is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
        ++j;
      } else {
        break;
      }
    }
    Token tok{std::string(text.substr(i, j - i)), i, j, at_sentence_start};
    if (j < text.size() && text[j] == '.' && is_title(to_lower(tok.text))) {
      ++j;
      tok.text.push_back('.');
      tok.end = j;
    }
    tokens.push_back(std::move(tok));
    at_sentence_start = false;
    i = j;
  }
  return tokens;
}

inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kWords = {
      "a", "an", "the", "and", "or", "but", "however", "because", "so", "also",
      "if", "then", "than", "of", "to", "in", "on", "at", "for", "with", "by",
      "from", "about", "as", "into", "over", "after", "before", "is", "are",
      "was", "were", "be", "been", "being", "am", "do", "does", "did", "have",
      "has", "had", "will", "would", "can", "could", "should", "may", "might",
      "must", "shall", "i", "me", "my", "mine", "we", "us", "our", "you",
      "your", "yours", "this", "that", "these", "those", "there", "here",
      "what", "which", "who", "whom", "whose", "when", "where", "why", "how",
      "not", "no", "yes", "ok", "okay", "please", "thanks", "thank", "hello",
      "hi", "hey", "sure", "great", "well", "just", "all", "any", "some",
      "it's", "i'm", "let", "let's", "now", "again", "yet", "too", "very",
      "up", "out", "it", "its", "he", "him", "his", "she", "her", "hers",
      "they", "them", "their", "theirs", "tell", "remind", "okay"};
  return kWords;
}

enum class PronounClass { kNone, kPerson, kNonPerson, kAny };

inline PronounClass pronoun_class(std::string_view lower) {
  if (lower == "he" || lower == "him" || lower == "his" || lower == "she" ||
      lower == "her" || lower == "hers") {
    return PronounClass::kPerson;
  }
  if (lower == "it" || lower == "its") return PronounClass::kNonPerson;
  if (lower == "they" || lower == "them" || lower == "their" || lower == "theirs") {
    return PronounClass::kAny;
  }
  return PronounClass::kNone;
}

inline bool is_capitalized(std::string_view word) {
  return !word.empty() && std::isupper(static_cast<unsigned char>(word.front()));
}

inline std::string guess_ner_type(const std::vector<std::string>& words) {
  static const std::set<std::string> kPlaces = {
      "hotel", "inn", "restaurant", "cafe", "station", "airport", "hospital",
      "clinic", "museum", "street", "road", "centre", "center", "park",
      "house", "lodge", "bar", "college", "theatre", "theater", "gallery"};
  static const std::set<std::string> kOrgs = {"ltd", "inc", "company", "bank",
                                               "university", "group", "agency"};
  const std::string last = to_lower(words.back());
  if (kPlaces.count(last)) return "LOC";
  if (kOrgs.count(last)) return "ORG";
  return "PERSON";
}

inline bool compatible(PronounClass pc, std::string_view ner_type) {
  switch (pc) {
    case PronounClass::kPerson: return ner_type == "PERSON";
    case PronounClass::kNonPerson: return ner_type != "PERSON";
    case PronounClass::kAny: return true;
    case PronounClass::kNone: return false;
  }
  return false;
}

}  // namespace toy

// `history` holds the prior turns of the same dialogue in order. New
// clusters get ids `<id_prefix>E<n>`; names already seen in the history
// reuse that cluster's id.
inline ToyAnnotation toy_annotate(std::string_view text,
                                  std::span<const MemoryEntry> history,
                                  std::string_view id_prefix = "") {
  using namespace toy;
  ToyAnnotation out;
  const auto tokens = tokenize(text);

  // Mentions visible for recency linking, oldest first.
  std::vector<EntityMention> visible;
  std::set<std::string> known_ids;
  for (const auto& turn : history) {
    for (const auto& e : turn.entities) {
      visible.push_back(e);
      known_ids.insert(e.coref_id);
    }
  }
  std::size_t next_number = known_ids.size() + 1;
  auto fresh_id = [&] {
    std::string id;
    do {
      id = std::string(id_prefix) + "E" + std::to_string(next_number++);
    } while (known_ids.count(id));
    known_ids.insert(id);
    return id;
  };
  auto lookup_name = [&](const std::string& lower_name) -> std::string {
    for (auto it = visible.rbegin(); it != visible.rend(); ++it) {
      if (pronoun_class(to_lower(it->name)) == PronounClass::kNone &&
          to_lower(it->name) == lower_name) {
        return it->coref_id;
      }
    }
    return {};
  };

  const auto& stop = stopwords();
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::string lower = to_lower(tokens[i].text);
    const PronounClass pc = pronoun_class(lower);
    if (pc != PronounClass::kNone) {
      for (auto it = visible.rbegin(); it != visible.rend(); ++it) {
        if (compatible(pc, it->ner_type)) {
          EntityMention m{tokens[i].text, it->coref_id, it->ner_type,
                          CharSpan{tokens[i].start, tokens[i].end}};
          out.entities.push_back(m);
          visible.push_back(std::move(m));
          break;
        }
      }
      ++i;
      continue;
    }
    if (!is_capitalized(tokens[i].text) || stop.count(lower)) {
      ++i;
      continue;
    }
    // Extend over adjacent capitalized tokens separated only by spaces.
    std::size_t j = i + 1;
    while (j < tokens.size() && is_capitalized(tokens[j].text) &&
           !stop.count(to_lower(tokens[j].text)) &&
           pronoun_class(to_lower(tokens[j].text)) == PronounClass::kNone) {
      const auto gap = text.substr(tokens[j - 1].end, tokens[j].start - tokens[j - 1].end);
      if (gap.find_first_not_of(' ') != std::string_view::npos) break;
      ++j;
    }
    std::vector<std::string> words;
    for (std::size_t k = i; k < j; ++k) words.push_back(tokens[k].text);
    const CharSpan span{tokens[i].start, tokens[j - 1].end};
    std::string name(text.substr(span.start, span.end - span.start));
    std::string coref = lookup_name(to_lower(name));
    if (coref.empty()) coref = fresh_id();
    EntityMention m{name, coref, guess_ner_type(words), span};
    out.entities.push_back(m);
    visible.push_back(std::move(m));
    i = j;
  }

  std::vector<std::string> content;
  for (const auto& t : tokens) {
    const std::string lower = to_lower(t.text);
    if (!stop.count(lower)) content.push_back(normalize_lemma(lower));
  }
  for (std::size_t k = 0; k + 1 < content.size(); ++k) {
    out.dep_triples.push_back({content[k], "next", content[k + 1]});
  }

  DiscourseKind kind = DiscourseKind::kExpansion;
  if (!tokens.empty()) {
    const std::string first = to_lower(tokens.front().text);
    if (first == "and" || first == "also") {
      kind = DiscourseKind::kElaboration;
    } else if (first == "but" || first == "however") {
      kind = DiscourseKind::kContrast;
    } else if (first == "because" || first == "so") {
      kind = DiscourseKind::kCause;
    }
  }
  out.discourse.push_back(DiscourseLabel::of(kind));
  return out;
}

inline constexpr std::size_t kMinToyDim = 8;

// Lowercased alphanumeric runs; the embedder's vocabulary.
inline std::vector<std::string> toy_embed_tokens(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

// Hashed bag of unigrams and bigrams, L2-normalized.
inline Embedding toy_embed(std::string_view text, std::size_t dim) {
  if (dim < kMinToyDim) {
    throw Error(ErrorCode::kInvalidArgument,
                "toy_embed: dim must be at least " + std::to_string(kMinToyDim));
  }
  const auto words = toy_embed_tokens(text);
  if (words.empty()) throw Error(ErrorCode::kInvalidArgument, "toy_embed: empty text");
  std::vector<float> counts(dim, 0.0f);
  for (std::size_t i = 0; i < words.size(); ++i) {
    counts[fnv1a64(words[i]) % dim] += 1.0f;
    if (i + 1 < words.size()) {
      counts[fnv1a64(words[i] + " " + words[i + 1]) % dim] += 1.0f;
    }
  }
  return normalize_embedding(counts, dim);
}

}  // namespace lingmem
