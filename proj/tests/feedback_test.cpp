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

#include <algorithm>
#include <map>

#include <gtest/gtest.h>

#include "intentloop/feedback.hpp"
#include "intentloop/generator.hpp"
#include "oracles.hpp"

namespace intentloop {
namespace {

using namespace testing;

FeedbackReport perfect_feedback(const Sample& s, const CheckerRegistry& reg = CheckerRegistry::standard()) {
  return compose_feedback(s.spec, s.graph, s.scene, {DetectorConfig::perfect(), 0.0}, reg, vocab(), 1);
}

TEST(Detect, PerfectDetectorIsIdentity) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto s = sample(rng);
    const auto dets = detect(s.scene, DetectorConfig::perfect(), spec_categories(s.spec), vocab(), 3);
    ASSERT_EQ(dets.size(), s.scene.entities.size());
    for (std::size_t k = 0; k < dets.size(); ++k) {
      EXPECT_EQ(dets[k].category, s.scene.entities[k].category);
      EXPECT_EQ(dets[k].attributes, s.scene.entities[k].attributes);
      EXPECT_EQ(dets[k].box, s.scene.entities[k].box);
      EXPECT_EQ(dets[k].source_entity, s.scene.entities[k].entity_id);
    }
  }
}

TEST(Detect, CertainMissSeesNothing) {
  Rng rng(2);
  DetectorConfig cfg;
  cfg.p_miss = 1.0;
  for (int i = 0; i < 50; ++i) {
    const auto s = sample(rng);
    EXPECT_TRUE(detect(s.scene, cfg, spec_categories(s.spec), vocab(), 3).empty());
  }
}

TEST(Detect, SuppressionHidesOverlappingDuplicate) {
  RenderedScene scene;
  scene.entities = {{"dog#0", "dog", {}, {100, 100, 80, 60}}, {"dog#0.dup", "dog", {}, {110, 100, 80, 60}}};
  DetectorConfig cfg;
  cfg.nms_iou = 0.35;
  EXPECT_EQ(detect(scene, cfg, {"dog"}, vocab(), 1).size(), 1u);
  EXPECT_EQ(detect(scene, DetectorConfig::perfect(), {"dog"}, vocab(), 1).size(), 2u);
}

TEST(Detect, InvalidConfigRejected) {
  DetectorConfig cfg;
  cfg.p_miss = 1.5;
  EXPECT_THROW(detect(RenderedScene{}, cfg, {}, vocab(), 1), Error);
}

TEST(Match, GroupsSortedByPosition) {
  const auto spec = parse_prompt("two cats and a dog", vocab());
  std::vector<Detection> dets{{"cat", {}, {300, 10, 20, 20}, std::nullopt},
                              {"dog", {}, {50, 50, 20, 20}, std::nullopt},
                              {"cat", {}, {100, 10, 20, 20}, std::nullopt},
                              {"cat", {}, {200, 10, 20, 20}, std::nullopt},
                              {"horse", {}, {0, 0, 20, 20}, std::nullopt}};
  const auto a = match_detections(spec, dets);
  ASSERT_EQ(a.groups[0].size(), 3u);
  EXPECT_EQ(a.groups[0][0].box.x, 100);
  EXPECT_EQ(a.groups[0][2].box.x, 300);
  EXPECT_EQ(a.surplus, (std::vector<int>{1, 0}));
  EXPECT_EQ(a.unassigned.size(), 1u);
}

TEST(Checkers, NumeracyExamples) {
  const auto spec = parse_prompt("two cats and a dog", vocab());
  std::vector<Detection> dets{{"cat", {}, {100, 10, 20, 20}, std::nullopt},
                              {"dog", {}, {50, 50, 20, 20}, std::nullopt},
                              {"dog", {}, {60, 50, 20, 20}, std::nullopt}};
  const auto items = check_numeracy(spec, match_detections(spec, dets));
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0].target, "cat");
  EXPECT_EQ(items[0].expected, "2");
  EXPECT_EQ(items[0].observed, "1");
  EXPECT_EQ(items[1].target, "dog");
  EXPECT_EQ(items[1].observed, "2");
  ASSERT_EQ(items[1].suggested_update.size(), 2u);
  EXPECT_EQ(items[1].suggested_update[0], (UpdateSignal{LayoutPin{"dog#0", std::nullopt}}));
}

TEST(Checkers, AttributeExamples) {
  const auto spec = parse_prompt("a red cat", vocab());
  std::vector<Detection> dets{{"cat", {"blue"}, {100, 10, 20, 20}, std::nullopt}};
  auto items = check_attributes(spec, match_detections(spec, dets));
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].target, "cat#0");
  EXPECT_EQ(items[0].expected, "red");
  EXPECT_EQ(items[0].observed, "blue");
  dets[0].attributes.clear();
  EXPECT_EQ(check_attributes(spec, match_detections(spec, dets))[0].observed, "absent");
}

TEST(Checkers, SpatialExamples) {
  const auto spec = parse_prompt("a cat left_of a dog", vocab());
  const auto graph = expand_instances(spec);
  std::vector<Detection> dets{{"cat", {}, {300, 10, 20, 20}, std::nullopt}, {"dog", {}, {100, 10, 20, 20}, std::nullopt}};
  auto items = check_spatial(spec, graph, match_detections(spec, dets), 0);
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].target, "cat#0 left_of dog#0");
  EXPECT_EQ(items[0].observed, "right_of");
  dets.pop_back();
  items = check_spatial(spec, graph, match_detections(spec, dets), 0);
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].observed, "undetected");
  EXPECT_EQ(items[0].severity, Severity::warning);
}

TEST(Checkers, SwapPlusFlip) {
  const auto spec = parse_prompt("a red cat left_of a blue dog", vocab());
  const auto graph = expand_instances(spec);
  RenderedScene scene;
  scene.entities = {{"cat#0", "cat", {"blue"}, {300, 200, 60, 50}}, {"dog#0", "dog", {"red"}, {100, 200, 80, 60}}};
  const auto report = compose_feedback(spec, graph, scene, {}, CheckerRegistry::standard(), vocab(), 1);
  EXPECT_FALSE(report.satisfied);
  ASSERT_EQ(report.items.size(), 3u);
  EXPECT_EQ(report.items[0].kind, FeedbackKind::attribute);
  EXPECT_EQ(report.items[1].kind, FeedbackKind::attribute);
  EXPECT_EQ(report.items[2].kind, FeedbackKind::spatial);
  EXPECT_EQ(report.items[0].item_id, "item-1");
  EXPECT_EQ(report.items[2].item_id, "item-3");
}

TEST(Checkers, FidelityFromKnowledge) {
  const auto spec = parse_prompt("a girl and a dog", vocab());
  const auto graph = expand_instances(spec);
  RenderedScene scene;
  scene.entities = {{"girl#0", "girl", {}, {300, 200, 60, 120}}, {"dog#0", "dog", {}, {100, 200, 80, 60}}};
  const auto table = DefaultsTable::builtin();
  const auto report = compose_feedback(spec, graph, scene, {}, CheckerRegistry::standard(&table), vocab(), 1);
  ASSERT_EQ(report.items.size(), 1u);
  EXPECT_EQ(report.items[0].kind, FeedbackKind::fidelity);
  EXPECT_EQ(report.items[0].target, "girl right_of dog");
}

TEST(Feedback, OracleEquivalence) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto s = sample(rng);
    const auto report = perfect_feedback(s);
    EXPECT_EQ(keys_of(report, FeedbackKind::numeracy), numeracy_oracle(s));
    EXPECT_EQ(attribute_items(report), attribute_oracle(s));
    EXPECT_EQ(keys_of(report, FeedbackKind::spatial), spatial_oracle(s));
  }
}

TEST(Feedback, SatisfiedIffNoErrors) {
  Rng rng(4);
  DetectorConfig noisy{0.2, 0.3, 0.1, 0.5, 0};
  for (int i = 0; i < 500; ++i) {
    const auto s = sample(rng);
    const auto report =
        compose_feedback(s.spec, s.graph, s.scene, {noisy, 0.0}, CheckerRegistry::standard(), vocab(), rng.next());
    const bool errors = std::any_of(report.items.begin(), report.items.end(),
                                    [](const FeedbackItem& it) { return it.severity == Severity::error; });
    EXPECT_EQ(report.satisfied, !errors);
    for (std::size_t k = 0; k < report.items.size(); ++k)
      EXPECT_EQ(report.items[k].item_id, "item-" + std::to_string(k + 1));
  }
}

TEST(Feedback, CheckersAreIndependent) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto s = sample(rng);
    const auto full = perfect_feedback(s);
    for (auto kind : {FeedbackKind::numeracy, FeedbackKind::attribute, FeedbackKind::spatial}) {
      const auto partial = perfect_feedback(s, CheckerRegistry::standard().without(kind));
      for (auto other : {FeedbackKind::numeracy, FeedbackKind::attribute, FeedbackKind::spatial})
        EXPECT_EQ(keys_of(partial, other), other == kind ? std::multiset<Key>{} : keys_of(full, other));
    }
  }
}

TEST(Feedback, JsonRoundTrip) {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto report = perfect_feedback(sample(rng));
    const auto j = nlohmann::json(report);
    EXPECT_EQ(nlohmann::json(j.get<FeedbackReport>()), j);
  }
}

}  // namespace
}  // namespace intentloop
