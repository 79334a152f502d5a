// Copyright 2026 The intentloop Authors
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

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "intentloop/error.hpp"
#include "intentloop/geometry.hpp"
#include "intentloop/vocab.hpp"

namespace intentloop {

inline constexpr std::size_t max_prompt_length = 1024;
inline constexpr int max_group_count = 9;

struct ObjectGroup {
  int group_id = 0;
  std::string category;
  int count = 1;
  std::set<std::string> attributes;
  friend bool operator==(const ObjectGroup&, const ObjectGroup&) = default;
};

struct Relation {
  int subject = 0;
  Predicate predicate = Predicate::left_of;
  int object = 0;
  friend bool operator==(const Relation&, const Relation&) = default;
};

/// Parsed user intent. Group ids equal their position in `groups`, and each
/// category appears in at most one group.
struct SceneSpec {
  std::vector<ObjectGroup> groups;
  std::vector<Relation> relations;

  const ObjectGroup* find(std::string_view category) const {
    for (const auto& g : groups)
      if (g.category == category) return &g;
    return nullptr;
  }

  int instance_count() const {
    int n = 0;
    for (const auto& g : groups) n += g.count;
    return n;
  }

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

inline void to_json(nlohmann::json& j, const ObjectGroup& g) {
  j = nlohmann::json{{"group_id", g.group_id},
                     {"category", g.category},
                     {"count", g.count},
                     {"attributes", g.attributes}};
}
inline void from_json(const nlohmann::json& j, ObjectGroup& g) {
  g.group_id = j.at("group_id").get<int>();
  g.category = j.at("category").get<std::string>();
  g.count = j.at("count").get<int>();
  g.attributes = j.at("attributes").get<std::set<std::string>>();
}
inline void to_json(nlohmann::json& j, const Relation& r) {
  j = nlohmann::json{{"subject", r.subject}, {"predicate", r.predicate}, {"object", r.object}};
}
inline void from_json(const nlohmann::json& j, Relation& r) {
  r.subject = j.at("subject").get<int>();
  r.predicate = j.at("predicate").get<Predicate>();
  r.object = j.at("object").get<int>();
}
inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{{"groups", s.groups}, {"relations", s.relations}};
}
inline void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.groups = j.at("groups").get<std::vector<ObjectGroup>>();
  s.relations = j.at("relations").get<std::vector<Relation>>();
}

/// Throws InvalidSpec on the first broken invariant.
inline void validate_spec(const SceneSpec& spec, const Vocabulary& vocab) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
  if (spec.groups.empty()) fail("scene spec has no groups");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    const auto& g = spec.groups[i];
    if (g.group_id != static_cast<int>(i)) fail("group ids must equal their position");
    if (!vocab.has_category(g.category)) fail("unknown category: " + g.category);
    if (!seen.insert(g.category).second) fail("duplicate category: " + g.category);
    if (g.count < 1 || g.count > max_group_count) fail("count out of range for " + g.category);
    for (const auto& a : g.attributes)
      if (!vocab.is_attribute(a)) fail("unknown attribute: " + a);
  }
  const int n = static_cast<int>(spec.groups.size());
  for (const auto& r : spec.relations) {
    if (r.subject < 0 || r.subject >= n || r.object < 0 || r.object >= n)
      fail("relation references a missing group");
    if (r.subject == r.object) fail("relation relates a group to itself");
  }
}

namespace detail {

inline constexpr std::array<std::string_view, 9> number_words{
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};

struct Token {
  std::string text;
  int position = 0;  // index into the raw token list
};

inline bool is_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

inline bool is_article(std::string_view s) { return s == "a" || s == "an" || s == "the"; }

/// Collapses multi-word relation phrases into predicate tokens.
inline std::vector<Token> normalize_synonyms(const std::vector<std::string>& raw) {
  struct Synonym {
    std::vector<std::string_view> words;
    Predicate predicate;
  };
  static const std::vector<Synonym> synonyms{
      {{"to", "the", "left", "of"}, Predicate::left_of},
      {{"to", "the", "right", "of"}, Predicate::right_of},
      {{"on", "top", "of"}, Predicate::above},
      {{"over"}, Predicate::above},
      {{"under"}, Predicate::below},
      {{"beneath"}, Predicate::below},
  };
  std::vector<Token> out;
  for (std::size_t i = 0; i < raw.size();) {
    bool matched = false;
    for (const auto& syn : synonyms) {
      if (i + syn.words.size() > raw.size()) continue;
      if (std::equal(syn.words.begin(), syn.words.end(), raw.begin() + static_cast<long>(i))) {
        out.push_back({to_string(syn.predicate), static_cast<int>(i)});
        i += syn.words.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back({raw[i], static_cast<int>(i)});
      ++i;
    }
  }
  return out;
}

}  // namespace detail

/// Lowercase word tokens. Anything outside [a-z0-9_] separates tokens and
/// number words one..nine become digits.
inline std::vector<std::string> tokenize(std::string_view text) {
  if (text.size() > max_prompt_length)
    throw ParseError(ErrorCode::PromptTooLong,
                     "prompt exceeds " + std::to_string(max_prompt_length) + " characters", -1);
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    for (std::size_t i = 0; i < detail::number_words.size(); ++i)
      if (current == detail::number_words[i]) current = std::to_string(i + 1);
    tokens.push_back(std::move(current));
    current.clear();
  };
  for (unsigned char c : text) {
    const auto lower = static_cast<char>(std::tolower(c));
    if (std::isalnum(static_cast<unsigned char>(lower)) || lower == '_')
      current.push_back(lower);
    else
      flush();
  }
  flush();
  if (tokens.empty()) throw ParseError(ErrorCode::EmptyPrompt, "prompt is empty", -1);
  return tokens;
}

namespace detail {

class PromptParser {
public:
  PromptParser(std::vector<Token> tokens, int raw_size, const Vocabulary& vocab)
      : tokens_(std::move(tokens)), raw_size_(raw_size), vocab_(vocab) {}

  SceneSpec run() {
    for (;;) {
      segment();
      if (at_end()) break;
      if (peek() != "and") fail_grammar("expected 'and' or end of prompt");
      ++pos_;
    }
    return std::move(spec_);
  }

private:
  struct Phrase {
    int group_id = 0;
    bool is_new = false;
    int position = 0;
  };

  bool at_end() const { return pos_ >= tokens_.size(); }
  const std::string& peek() const { return tokens_[pos_].text; }
  int position() const { return at_end() ? raw_size_ : tokens_[pos_].position; }

  [[noreturn]] void fail_grammar(const std::string& why) const {
    throw ParseError(ErrorCode::GrammarError, why, position(), at_end() ? "" : peek());
  }

  bool is_keyword(std::string_view s) const {
    return s == "and" || is_article(s) || is_digits(s) || predicate_from_string(s).has_value();
  }

  void segment() {
    const Phrase lhs = phrase();
    if (!at_end()) {
      if (auto pred = predicate_from_string(peek())) {
        ++pos_;
        const Phrase rhs = phrase();
        if (lhs.group_id == rhs.group_id)
          throw ParseError(ErrorCode::GrammarError, "relation relates a group to itself",
                           rhs.position);
        spec_.relations.push_back({lhs.group_id, *pred, rhs.group_id});
        return;
      }
    }
    if (!lhs.is_new)
      throw ParseError(ErrorCode::GrammarError,
                       "a repeated category must take part in a relation", lhs.position);
  }

  Phrase phrase() {
    if (at_end()) fail_grammar("expected a noun phrase");
    const int start = position();
    if (is_article(peek())) ++pos_;
    int count = 1;
    bool has_count = false;
    if (!at_end() && is_digits(peek())) {
      const std::string& digits = peek();
      count = digits.size() > 2 ? 100 : std::stoi(digits);
      if (count < 1 || count > max_group_count) fail_grammar("count must be between 1 and 9");
      has_count = true;
      ++pos_;
    }
    std::set<std::string> attributes;
    while (!at_end() && vocab_.is_attribute(peek())) {
      if (!attributes.insert(peek()).second) fail_grammar("duplicate attribute");
      ++pos_;
    }
    if (at_end()) fail_grammar("expected a category");
    const std::string& noun = peek();
    if (is_keyword(noun)) fail_grammar("expected a category");
    auto category = vocab_.category_for(noun);
    if (!category) {
      // An unknown word followed by more noun-phrase words sits in modifier
      // position.
      const bool modifier = pos_ + 1 < tokens_.size() && !is_keyword(tokens_[pos_ + 1].text);
      throw ParseError(modifier ? ErrorCode::UnknownAttribute : ErrorCode::UnknownCategory,
                       (modifier ? "unknown attribute: " : "unknown category: ") + noun,
                       position(), noun);
    }
    ++pos_;
    if (const ObjectGroup* existing = spec_.find(*category)) {
      if (has_count || !attributes.empty())
        throw ParseError(ErrorCode::GrammarError, "category already introduced: " + *category,
                         start, *category);
      return {existing->group_id, false, start};
    }
    const int id = static_cast<int>(spec_.groups.size());
    spec_.groups.push_back({id, *category, count, std::move(attributes)});
    return {id, true, start};
  }

  std::vector<Token> tokens_;
  int raw_size_;
  const Vocabulary& vocab_;
  std::size_t pos_ = 0;
  SceneSpec spec_;
};

}  // namespace detail

/// Grammar (after synonym normalization):
///   prompt   := segment { "and" segment }
///   segment  := phrase [ relpred phrase ]
///   phrase   := [article] [count] {attribute} category
/// A phrase naming an already introduced category is a back-reference; it
/// takes no count or attributes and must appear in a relation.
inline SceneSpec parse_prompt(std::string_view text, const Vocabulary& vocab) {
  const auto raw = tokenize(text);
  return detail::PromptParser(detail::normalize_synonyms(raw), static_cast<int>(raw.size()), vocab)
      .run();
}

namespace detail {

inline std::string phrase_text(const ObjectGroup& g, const Vocabulary& vocab) {
  const auto& info = vocab.category(g.category);
  std::string words;
  for (const auto& a : g.attributes) words += a + " ";
  words += g.count == 1 ? info.name : info.plural;
  if (g.count > 1) return std::string(number_words[static_cast<std::size_t>(g.count - 1)]) + " " + words;
  const bool vowel = std::string_view("aeiou").find(words.front()) != std::string_view::npos;
  return (vowel ? "an " : "a ") + words;
}

inline std::string reference_text(const ObjectGroup& g, const Vocabulary& vocab) {
  const auto& info = vocab.category(g.category);
  return "the " + (g.count == 1 ? info.name : info.plural);
}

}  // namespace detail

/// Deterministic surface form with parse_prompt(spec_to_canonical_text(s)) == s.
/// A first relation between the last two groups is folded into the group
/// list ("a girl right_of a dog"); any other relation becomes a trailing
/// "and the X pred the Y" segment.
inline std::string spec_to_canonical_text(const SceneSpec& spec, const Vocabulary& vocab) {
  const int n = static_cast<int>(spec.groups.size());
  std::size_t first_trailing = 0;
  std::ostringstream out;
  const bool compact = n >= 2 && !spec.relations.empty() && spec.relations[0].subject == n - 2 &&
                       spec.relations[0].object == n - 1;
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      if (compact && i == n - 1)
        out << ' ' << to_string(spec.relations[0].predicate) << ' ';
      else
        out << " and ";
    }
    out << detail::phrase_text(spec.groups[static_cast<std::size_t>(i)], vocab);
  }
  if (compact) first_trailing = 1;
  for (std::size_t r = first_trailing; r < spec.relations.size(); ++r) {
    const auto& rel = spec.relations[r];
    out << " and " << detail::reference_text(spec.groups[static_cast<std::size_t>(rel.subject)], vocab)
        << ' ' << to_string(rel.predicate) << ' '
        << detail::reference_text(spec.groups[static_cast<std::size_t>(rel.object)], vocab);
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Knowledge enrichment

struct RelationAddition {
  std::string subject;
  Predicate predicate = Predicate::left_of;
  std::string object;
  friend bool operator==(const RelationAddition&, const RelationAddition&) = default;
};

struct AttributeAddition {
  std::string category;
  std::string attribute;
  friend bool operator==(const AttributeAddition&, const AttributeAddition&) = default;
};

/// Additions expressed by category so they survive re-parsing.
struct SpecAdditions {
  std::vector<RelationAddition> relations;
  std::vector<AttributeAddition> attributes;
  bool empty() const { return relations.empty() && attributes.empty(); }
  friend bool operator==(const SpecAdditions&, const SpecAdditions&) = default;
};

inline void to_json(nlohmann::json& j, const RelationAddition& r) {
  j = nlohmann::json{{"subject", r.subject}, {"predicate", r.predicate}, {"object", r.object}};
}
inline void from_json(const nlohmann::json& j, RelationAddition& r) {
  r.subject = j.at("subject").get<std::string>();
  r.predicate = j.at("predicate").get<Predicate>();
  r.object = j.at("object").get<std::string>();
}
inline void to_json(nlohmann::json& j, const AttributeAddition& a) {
  j = nlohmann::json{{"category", a.category}, {"attribute", a.attribute}};
}
inline void from_json(const nlohmann::json& j, AttributeAddition& a) {
  a.category = j.at("category").get<std::string>();
  a.attribute = j.at("attribute").get<std::string>();
}
inline void to_json(nlohmann::json& j, const SpecAdditions& s) {
  j = nlohmann::json{{"relations", s.relations}, {"attributes", s.attributes}};
}
inline void from_json(const nlohmann::json& j, SpecAdditions& s) {
  s.relations = j.value("relations", std::vector<RelationAddition>{});
  s.attributes = j.value("attributes", std::vector<AttributeAddition>{});
}

/// One rule: when every pattern category is present, apply the additions.
struct DefaultsRule {
  std::vector<std::string> pattern;
  SpecAdditions additions;
};

struct DefaultsTable {
  std::vector<DefaultsRule> rules;

  /// Text format, one rule per line:
  ///   pair <catA> <catB> => <catA> <pred> <catB>[, <cat> <color>...]
  ///   has <cat> => <cat> <color>
  static DefaultsTable parse(std::string_view text, const Vocabulary& vocab) {
    DefaultsTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto bad = [&](const std::string& why) {
        return Error(ErrorCode::InvalidConfig,
                     "knowledge line " + std::to_string(line_no) + ": " + why);
      };
      const auto arrow = line.find("=>");
      if (arrow == std::string::npos) throw bad("missing '=>'");
      DefaultsRule rule;
      std::istringstream lhs(line.substr(0, arrow));
      std::string kind;
      lhs >> kind;
      for (std::string cat; lhs >> cat;) {
        if (!vocab.has_category(cat)) throw bad("unknown category " + cat);
        rule.pattern.push_back(cat);
      }
      if ((kind == "pair" && rule.pattern.size() != 2) || (kind == "has" && rule.pattern.size() != 1) ||
          (kind != "pair" && kind != "has"))
        throw bad("pattern must be 'pair <a> <b>' or 'has <a>'");
      std::istringstream rhs(line.substr(arrow + 2));
      std::string item;
      while (std::getline(rhs, item, ',')) {
        std::istringstream words(item);
        std::vector<std::string> w;
        for (std::string s; words >> s;) w.push_back(s);
        auto in_pattern = [&](const std::string& c) {
          return std::find(rule.pattern.begin(), rule.pattern.end(), c) != rule.pattern.end();
        };
        if (w.size() == 3) {
          auto pred = predicate_from_string(w[1]);
          if (!pred || !in_pattern(w[0]) || !in_pattern(w[2]) || w[0] == w[2])
            throw bad("bad relation addition '" + item + "'");
          rule.additions.relations.push_back({w[0], *pred, w[2]});
        } else if (w.size() == 2) {
          if (!in_pattern(w[0]) || !vocab.is_attribute(w[1]))
            throw bad("bad attribute addition '" + item + "'");
          rule.additions.attributes.push_back({w[0], w[1]});
        } else {
          throw bad("cannot read addition '" + item + "'");
        }
      }
      table.rules.push_back(std::move(rule));
    }
    return table;
  }

  /// Rules shipped in data/knowledge.txt.
  static const DefaultsTable& builtin() {
    static const DefaultsTable table = parse(builtin::knowledge_text, Vocabulary::builtin());
    return table;
  }
};

namespace detail {

enum class RelationStatus { absent, present, conflicting };

/// Compares by axis order, so "a left_of b" is present when "b right_of a"
/// exists and conflicts with "a right_of b".
inline RelationStatus relation_status(const SceneSpec& spec, int subject, Predicate p, int object) {
  auto ordered = [](int s, Predicate q, int o) {
    return subject_first(q) ? std::pair{s, o} : std::pair{o, s};
  };
  const auto want = ordered(subject, p, object);
  for (const auto& r : spec.relations) {
    if (axis_of(r.predicate) != axis_of(p)) continue;
    const auto have = ordered(r.subject, r.predicate, r.object);
    if (have == want) return RelationStatus::present;
    if (have.first == want.second && have.second == want.first) return RelationStatus::conflicting;
  }
  return RelationStatus::absent;
}

inline int group_of(const SceneSpec& spec, const std::string& category) {
  const ObjectGroup* g = spec.find(category);
  if (!g) throw Error(ErrorCode::InvalidTarget, "no group with category " + category);
  return g->group_id;
}

}  // namespace detail

/// Applies additions in order. Relations already implied are skipped; a
/// relation contradicting an existing one raises RuleConflict. With
/// `fill_only` set, attributes are only added to groups that have none.
/// Returns true when the spec changed.
inline bool merge_additions(SceneSpec& spec, const SpecAdditions& additions, bool fill_only) {
  bool changed = false;
  for (const auto& add : additions.relations) {
    const int s = detail::group_of(spec, add.subject);
    const int o = detail::group_of(spec, add.object);
    switch (detail::relation_status(spec, s, add.predicate, o)) {
      case detail::RelationStatus::present: break;
      case detail::RelationStatus::conflicting:
        throw Error(ErrorCode::RuleConflict,
                    add.subject + " " + to_string(add.predicate) + " " + add.object +
                        " contradicts an existing relation",
                    nlohmann::json{{"relation", add}});
      case detail::RelationStatus::absent:
        spec.relations.push_back({s, add.predicate, o});
        changed = true;
        break;
    }
  }
  for (const auto& add : additions.attributes) {
    auto& group = spec.groups[static_cast<std::size_t>(detail::group_of(spec, add.category))];
    if (fill_only && !group.attributes.empty()) continue;
    changed |= group.attributes.insert(add.attribute).second;
  }
  return changed;
}

inline bool rule_matches(const DefaultsRule& rule, const SceneSpec& spec) {
  return std::all_of(rule.pattern.begin(), rule.pattern.end(),
                     [&](const std::string& c) { return spec.find(c) != nullptr; });
}

/// Superset of `spec`: same groups, relations and attributes only added.
/// Idempotent.
inline SceneSpec enrich_spec(const SceneSpec& spec, const DefaultsTable& table) {
  SceneSpec out = spec;
  for (const auto& rule : table.rules)
    if (rule_matches(rule, out)) merge_additions(out, rule.additions, /*fill_only=*/true);
  return out;
}

/// The additions enrich_spec would actually make, in rule order.
inline SpecAdditions pending_additions(const SceneSpec& spec, const DefaultsTable& table) {
  SpecAdditions pending;
  SceneSpec probe = spec;
  for (const auto& rule : table.rules) {
    if (!rule_matches(rule, probe)) continue;
    for (const auto& rel : rule.additions.relations)
      if (merge_additions(probe, SpecAdditions{{rel}, {}}, true)) pending.relations.push_back(rel);
    for (const auto& attr : rule.additions.attributes)
      if (merge_additions(probe, SpecAdditions{{}, {attr}}, true)) pending.attributes.push_back(attr);
  }
  return pending;
}

}  // namespace intentloop
