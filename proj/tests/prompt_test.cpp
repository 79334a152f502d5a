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

#include <gtest/gtest.h>

#include "intentloop/bench.hpp"
#include "intentloop/prompt.hpp"
#include "support.hpp"

namespace intentloop {
namespace {

using testing::random_spec;
using testing::vocab;

template <typename Fn>
ErrorCode error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::NotFound;
}

TEST(Tokenize, SplitsLowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("A black laptop and a yellow chair"),
            (std::vector<std::string>{"a", "black", "laptop", "and", "a", "yellow", "chair"}));
  EXPECT_EQ(tokenize("Three apples."), (std::vector<std::string>{"3", "apples"}));
  EXPECT_EQ(tokenize("nine, cats!"), (std::vector<std::string>{"9", "cats"}));
}

TEST(Tokenize, RejectsEmptyAndOverlongPrompts) {
  EXPECT_EQ(error_of([] { tokenize("   "); }), ErrorCode::EmptyPrompt);
  EXPECT_EQ(error_of([] { tokenize("?!"); }), ErrorCode::EmptyPrompt);
  EXPECT_EQ(error_of([] { tokenize(std::string(1025, 'a')); }), ErrorCode::PromptTooLong);
  EXPECT_NO_THROW(tokenize(std::string(1024, 'a')));
}

TEST(ParsePrompt, TwoAttributedObjects) {
  const auto spec = parse_prompt("a black laptop and a yellow chair", vocab());
  SceneSpec want{{{0, "laptop", 1, {"black"}}, {1, "chair", 1, {"yellow"}}}, {}};
  EXPECT_EQ(spec, want);
}

TEST(ParsePrompt, UnderIsBelow) {
  const auto spec = parse_prompt("a cup under a chair", vocab());
  SceneSpec want{{{0, "cup", 1, {}}, {1, "chair", 1, {}}}, {{0, Predicate::below, 1}}};
  EXPECT_EQ(spec, want);
}

TEST(ParsePrompt, SingleObject) {
  EXPECT_EQ(parse_prompt("a dog", vocab()), (SceneSpec{{{0, "dog", 1, {}}}, {}}));
}

TEST(ParsePrompt, SurfaceSynonymsNormalize) {
  struct Case {
    const char* text;
    Predicate p;
  };
  for (const auto& c : {Case{"a cup on top of a table", Predicate::above}, Case{"a cup over a table", Predicate::above},
                        Case{"a cup beneath a table", Predicate::below}, Case{"a cup under a table", Predicate::below},
                        Case{"a cup to the left of a table", Predicate::left_of},
                        Case{"a cup to the right of a table", Predicate::right_of},
                        Case{"a cup left_of a table", Predicate::left_of}, Case{"a cup above a table", Predicate::above}}) {
    const auto spec = parse_prompt(c.text, vocab());
    ASSERT_EQ(spec.relations.size(), 1u) << c.text;
    EXPECT_EQ(spec.relations[0].predicate, c.p) << c.text;
  }
}

TEST(ParsePrompt, PluralsAndCounts) {
  const auto spec = parse_prompt("three red apples", vocab());
  EXPECT_EQ(spec, (SceneSpec{{{0, "apple", 3, {"red"}}}, {}}));
  EXPECT_EQ(parse_prompt("5 dogs", vocab()).groups[0].count, 5);
}

TEST(ParsePrompt, ErrorsCarryTokenPosition) {
  try {
    parse_prompt("a purple dog", vocab());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownAttribute);
    EXPECT_EQ(e.position(), 1);
  }
  try {
    parse_prompt("a dog and a unicorn", vocab());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownCategory);
    EXPECT_EQ(e.position(), 4);
  }
  EXPECT_EQ(error_of([] { parse_prompt("a dog and", vocab()); }), ErrorCode::GrammarError);
  EXPECT_EQ(error_of([] { parse_prompt("left_of a dog", vocab()); }), ErrorCode::GrammarError);
}

TEST(ParsePrompt, Deterministic) {
  for (const char* text : {"two blue cups and a table", "a girl right_of a dog"})
    EXPECT_EQ(parse_prompt(text, vocab()), parse_prompt(text, vocab()));
}

TEST(CanonicalText, Examples) {
  EXPECT_EQ(spec_to_canonical_text(SceneSpec{{{0, "dog", 1, {}}}, {}}, vocab()), "a dog");
  EXPECT_EQ(spec_to_canonical_text(SceneSpec{{{0, "apple", 3, {"red"}}}, {}}, vocab()), "three red apples");
  const SceneSpec fig4{{{0, "girl", 1, {}}, {1, "dog", 1, {}}}, {{0, Predicate::right_of, 1}}};
  const auto text = spec_to_canonical_text(fig4, vocab());
  EXPECT_EQ(text, "a girl right_of a dog");
  EXPECT_EQ(parse_prompt(text, vocab()), fig4);
}

TEST(CanonicalText, RoundTripOnRandomSpecs) {
  Rng rng(20260101);
  for (int i = 0; i < 1000; ++i) {
    const auto spec = random_spec(rng, 4, 9, 3);
    ASSERT_NO_THROW(validate_spec(spec, vocab()));
    const auto text = spec_to_canonical_text(spec, vocab());
    SceneSpec back;
    ASSERT_NO_THROW(back = parse_prompt(text, vocab())) << text;
    EXPECT_EQ(back, spec) << text;
  }
}

TEST(CanonicalText, RoundTripOnCorpus) {
  for (auto task : all_tasks)
    for (const auto& e : generate_corpus(task, 200, 3, vocab()))
      EXPECT_EQ(parse_prompt(spec_to_canonical_text(e.spec, vocab()), vocab()), e.spec);
}

TEST(ValidateSpec, RejectsBrokenInvariants) {
  EXPECT_EQ(error_of([] { validate_spec(SceneSpec{}, vocab()); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(error_of([] { validate_spec(SceneSpec{{{0, "dog", 10, {}}}, {}}, vocab()); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(error_of([] { validate_spec(SceneSpec{{{0, "dog", 1, {}}}, {{0, Predicate::above, 0}}}, vocab()); }),
            ErrorCode::InvalidSpec);
  EXPECT_EQ(error_of([] { validate_spec(SceneSpec{{{0, "dog", 1, {"shiny"}}}, {}}, vocab()); }),
            ErrorCode::InvalidSpec);
}

const DefaultsTable& girl_dog_table() {
  static const DefaultsTable t = DefaultsTable::parse("pair girl dog => girl right_of dog\n", vocab());
  return t;
}

TEST(EnrichSpec, AddsRuleRelation) {
  const auto spec = parse_prompt("a girl and a dog", vocab());
  const auto out = enrich_spec(spec, girl_dog_table());
  EXPECT_EQ(out.groups, spec.groups);
  ASSERT_EQ(out.relations.size(), 1u);
  EXPECT_EQ(out.relations[0], (Relation{0, Predicate::right_of, 1}));
}

TEST(EnrichSpec, EmptyTableIsIdentity) {
  const auto spec = parse_prompt("a girl and a dog", vocab());
  EXPECT_EQ(enrich_spec(spec, DefaultsTable{}), spec);
}

TEST(EnrichSpec, ConflictingRuleRaises) {
  const auto spec = parse_prompt("a girl left_of a dog", vocab());
  EXPECT_EQ(error_of([&] { enrich_spec(spec, girl_dog_table()); }), ErrorCode::RuleConflict);
  // The same fact stated from the other side is not a conflict.
  const auto same = parse_prompt("a dog left_of a girl", vocab());
  EXPECT_EQ(enrich_spec(same, girl_dog_table()), same);
}

TEST(EnrichSpec, IdempotentAndMonotoneOnRandomSpecs) {
  const auto& table = DefaultsTable::builtin();
  Rng rng(77);
  int enriched = 0;
  for (int i = 0; i < 2000; ++i) {
    auto spec = random_spec(rng, 3, 3, 0);
    // Bias toward categories the shipped rules mention.
    if (i % 2 == 0) spec = parse_prompt(i % 4 == 0 ? "a girl and a dog and a banana" : "a cup and a table", vocab());
    SceneSpec once;
    try {
      once = enrich_spec(spec, table);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::RuleConflict);
      continue;
    }
    enriched += once != spec;
    EXPECT_EQ(enrich_spec(once, table), once);
    ASSERT_EQ(once.groups.size(), spec.groups.size());
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
      EXPECT_EQ(once.groups[g].category, spec.groups[g].category);
      EXPECT_EQ(once.groups[g].count, spec.groups[g].count);
      for (const auto& a : spec.groups[g].attributes) EXPECT_TRUE(once.groups[g].attributes.count(a));
    }
    for (const auto& r : spec.relations)
      EXPECT_NE(std::find(once.relations.begin(), once.relations.end(), r), once.relations.end());
  }
  EXPECT_GT(enriched, 0);
}

TEST(DefaultsTable, ParsesShippedTableAndRejectsBadLines) {
  EXPECT_FALSE(DefaultsTable::builtin().rules.empty());
  EXPECT_EQ(error_of([] { DefaultsTable::parse("pair girl => girl above dog\n", vocab()); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(error_of([] { DefaultsTable::parse("has dog dog purple\n", vocab()); }), ErrorCode::InvalidConfig);
}

TEST(Vocabulary, ShipsThirtyCategoriesAndEightColors) {
  EXPECT_EQ(vocab().categories().size(), 30u);
  EXPECT_EQ(vocab().attributes(),
            (std::vector<std::string>{"black", "white", "red", "yellow", "blue", "green", "brown", "gray"}));
}

}  // namespace
}  // namespace intentloop
