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
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "intentloop/error.hpp"
#include "intentloop/generator.hpp"
#include "intentloop/geometry.hpp"
#include "intentloop/layout.hpp"
#include "intentloop/prompt.hpp"
#include "intentloop/rng.hpp"
#include "intentloop/update.hpp"
#include "intentloop/vocab.hpp"

namespace intentloop {

struct DetectorConfig {
  double p_miss = 0.0;
  double p_false = 0.0;
  double attr_confusion = 0.0;
  /// Same-category detections overlapping an earlier one by more than this
  /// IoU are suppressed; 1 disables suppression.
  double nms_iou = 1.0;
  std::uint64_t seed = 0;

  static DetectorConfig perfect() { return {}; }

  void validate() const {
    if (!(p_miss >= 0.0 && p_miss <= 1.0)) throw Error(ErrorCode::InvalidConfig, "p_miss must lie in [0, 1]");
    if (!(attr_confusion >= 0.0 && attr_confusion <= 1.0))
      throw Error(ErrorCode::InvalidConfig, "attr_confusion must lie in [0, 1]");
    if (!(p_false >= 0.0)) throw Error(ErrorCode::InvalidConfig, "p_false must be >= 0");
    if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw Error(ErrorCode::InvalidConfig, "nms_iou must lie in (0, 1]");
  }

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

inline void to_json(nlohmann::json& j, const DetectorConfig& c) {
  j = nlohmann::json{{"p_miss", c.p_miss},
                     {"p_false", c.p_false},
                     {"attr_confusion", c.attr_confusion},
                     {"nms_iou", c.nms_iou},
                     {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, DetectorConfig& c) {
  c.p_miss = j.value("p_miss", 0.0);
  c.p_false = j.value("p_false", 0.0);
  c.attr_confusion = j.value("attr_confusion", 0.0);
  c.nms_iou = j.value("nms_iou", 1.0);
  c.seed = j.value("seed", std::uint64_t{0});
}

struct Detection {
  std::string category;
  std::set<std::string> attributes;
  BoundingBox box;
  std::optional<std::string> source_entity;  // oracle tests only
  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Simulated detector. Entities are visited in scene order; each is missed
/// with p_miss, and each attribute of a detected entity is misread as a
/// uniformly chosen other attribute with attr_confusion. Surviving
/// detections then go through same-category suppression at nms_iou.
/// Finally Poisson(p_false) spurious detections are appended, with a
/// category drawn from `query` (the categories the prompt asks about), a
/// random box and one random attribute.
inline std::vector<Detection> detect(const RenderedScene& scene, const DetectorConfig& cfg,
                                     const std::vector<std::string>& query, const Vocabulary& vocab,
                                     std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(mix_seed(seed, Stream::detect), cfg.seed));
  const auto& palette = vocab.attributes();
  std::vector<Detection> out;
  for (const auto& e : scene.entities) {
    const bool missed = rng.uniform() < cfg.p_miss;
    Detection d{e.category, {}, e.box, e.entity_id};
    for (const auto& a : e.attributes) {
      const double u = rng.uniform();
      if (u < cfg.attr_confusion && palette.size() > 1) {
        std::size_t k = rng.index(palette.size() - 1);
        std::vector<std::string> others;
        for (const auto& p : palette)
          if (p != a) others.push_back(p);
        d.attributes.insert(others[std::min(k, others.size() - 1)]);
      } else {
        d.attributes.insert(a);
      }
    }
    if (missed) continue;
    const bool suppressed = std::any_of(out.begin(), out.end(), [&](const Detection& kept) {
      return kept.category == d.category && iou(kept.box, d.box) > cfg.nms_iou;
    });
    if (!suppressed) out.push_back(std::move(d));
  }
  const int spurious = cfg.p_false > 0.0 ? rng.poisson(cfg.p_false) : 0;
  for (int s = 0; s < spurious && !query.empty(); ++s) {
    const auto& cat = query[rng.index(query.size())];
    const auto& info = vocab.category(cat);
    const double w = info.width * rng.uniform(0.8, 1.2), h = info.height * rng.uniform(0.8, 1.2);
    Detection d{cat, {}, {rng.uniform(0.0, scene.canvas.width - w), rng.uniform(0.0, scene.canvas.height - h), w, h},
                std::nullopt};
    if (!palette.empty()) d.attributes.insert(palette[rng.index(palette.size())]);
    out.push_back(std::move(d));
  }
  return out;
}

/// Detections per group, each list sorted by (cx, cy).
struct Assignment {
  std::vector<std::vector<Detection>> groups;
  std::vector<int> surplus;             // per group, max(0, assigned - count)
  std::vector<Detection> unassigned;    // categories absent from the spec
};

inline bool position_less(const Detection& a, const Detection& b) {
  return std::tuple(a.box.cx(), a.box.cy(), a.box.w, a.box.h) < std::tuple(b.box.cx(), b.box.cy(), b.box.w, b.box.h);
}

inline Assignment match_detections(const SceneSpec& spec, const std::vector<Detection>& detections) {
  Assignment a;
  a.groups.resize(spec.groups.size());
  a.surplus.assign(spec.groups.size(), 0);
  for (const auto& d : detections) {
    if (const auto* g = spec.find(d.category))
      a.groups[static_cast<std::size_t>(g->group_id)].push_back(d);
    else
      a.unassigned.push_back(d);
  }
  for (std::size_t i = 0; i < a.groups.size(); ++i) {
    std::stable_sort(a.groups[i].begin(), a.groups[i].end(), position_less);
    a.surplus[i] = std::max(0, static_cast<int>(a.groups[i].size()) - spec.groups[i].count);
  }
  std::stable_sort(a.unassigned.begin(), a.unassigned.end(), position_less);
  return a;
}

enum class FeedbackKind { numeracy, attribute, spatial, fidelity };
enum class Severity { error, warning };

NLOHMANN_JSON_SERIALIZE_ENUM(FeedbackKind, {
    {FeedbackKind::numeracy, "numeracy"},
    {FeedbackKind::attribute, "attribute"},
    {FeedbackKind::spatial, "spatial"},
    {FeedbackKind::fidelity, "fidelity"},
})
NLOHMANN_JSON_SERIALIZE_ENUM(Severity, {{Severity::error, "error"}, {Severity::warning, "warning"}})

inline const char* to_string(FeedbackKind k) {
  switch (k) {
    case FeedbackKind::numeracy: return "numeracy";
    case FeedbackKind::attribute: return "attribute";
    case FeedbackKind::spatial: return "spatial";
    case FeedbackKind::fidelity: return "fidelity";
  }
  return "?";
}

/// Target formats: numeracy "<category>" (the group), attribute
/// "<instance_id>", spatial "<subject_id> <predicate> <object_id>",
/// fidelity "<category> <predicate> <category>" or "<category> <attribute>".
struct FeedbackItem {
  std::string item_id;
  FeedbackKind kind = FeedbackKind::numeracy;
  std::string target;
  std::string expected;
  std::string observed;
  Severity severity = Severity::error;
  std::vector<UpdateSignal> suggested_update;
  friend bool operator==(const FeedbackItem&, const FeedbackItem&) = default;
};

struct FeedbackReport {
  std::vector<FeedbackItem> items;
  bool satisfied = true;

  std::size_t count(FeedbackKind k, std::optional<Severity> s = std::nullopt) const {
    return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [&](const FeedbackItem& i) {
      return i.kind == k && (!s || i.severity == *s);
    }));
  }
  const FeedbackItem* find(std::string_view id) const {
    for (const auto& i : items)
      if (i.item_id == id) return &i;
    return nullptr;
  }
  friend bool operator==(const FeedbackReport&, const FeedbackReport&) = default;
};

inline void to_json(nlohmann::json& j, const FeedbackItem& i) {
  j = nlohmann::json{{"item_id", i.item_id},   {"kind", i.kind},         {"target", i.target},
                     {"expected", i.expected}, {"observed", i.observed}, {"severity", i.severity},
                     {"suggested_update", i.suggested_update}};
}
inline void from_json(const nlohmann::json& j, FeedbackItem& i) {
  i.item_id = j.at("item_id").get<std::string>();
  i.kind = j.at("kind").get<FeedbackKind>();
  i.target = j.at("target").get<std::string>();
  i.expected = j.at("expected").get<std::string>();
  i.observed = j.at("observed").get<std::string>();
  i.severity = j.at("severity").get<Severity>();
  i.suggested_update = j.at("suggested_update").get<std::vector<UpdateSignal>>();
}
inline void to_json(nlohmann::json& j, const FeedbackReport& r) {
  j = nlohmann::json{{"items", r.items}, {"satisfied", r.satisfied}};
}
inline void from_json(const nlohmann::json& j, FeedbackReport& r) {
  r.items = j.at("items").get<std::vector<FeedbackItem>>();
  r.satisfied = j.at("satisfied").get<bool>();
}

struct CheckContext {
  const SceneSpec& spec;
  const SceneGraph& graph;
  const Assignment& assignment;
  double margin = 0.0;
};

/// One feedback function. Implementations must be stateless after
/// construction.
class Checker {
 public:
  virtual ~Checker() = default;
  virtual FeedbackKind kind() const = 0;
  virtual std::vector<FeedbackItem> check(const CheckContext& ctx) const = 0;
};

inline std::vector<FeedbackItem> check_numeracy(const SceneSpec& spec, const Assignment& assignment) {
  std::vector<FeedbackItem> items;
  for (const auto& g : spec.groups) {
    const int observed = static_cast<int>(assignment.groups[static_cast<std::size_t>(g.group_id)].size());
    if (observed == g.count) continue;
    FeedbackItem item{"", FeedbackKind::numeracy, g.category, std::to_string(g.count), std::to_string(observed),
                      Severity::error, {}};
    if (observed > g.count) {
      for (int k = 0; k < g.count; ++k)
        item.suggested_update.push_back({LayoutPin{make_instance_id(g.category, k), std::nullopt}});
    } else {
      item.suggested_update.push_back({AddInstanceConstraint{g.group_id, observed - g.count}});
    }
    item.suggested_update.push_back({Reroll{}});
    items.push_back(std::move(item));
  }
  return items;
}

inline std::string join_attributes(const std::set<std::string>& attrs) {
  if (attrs.empty()) return "absent";
  std::string out;
  for (const auto& a : attrs) out += (out.empty() ? "" : ",") + a;
  return out;
}

inline std::vector<FeedbackItem> check_attributes(const SceneSpec& spec, const Assignment& assignment) {
  std::vector<FeedbackItem> items;
  for (const auto& g : spec.groups) {
    if (g.attributes.empty()) continue;
    const auto& dets = assignment.groups[static_cast<std::size_t>(g.group_id)];
    for (std::size_t r = 0; r < dets.size(); ++r) {
      const auto target = make_instance_id(g.category, std::min(static_cast<int>(r), g.count - 1));
      for (const auto& attr : g.attributes) {
        if (dets[r].attributes.count(attr)) continue;
        items.push_back({"", FeedbackKind::attribute, target, attr, join_attributes(dets[r].attributes),
                         Severity::error, {{AttributePin{target, attr}}}});
      }
    }
  }
  return items;
}

namespace detail {

/// Detection of `instance_id`, pairing by rank on `axis` within its group.
inline const Detection* ranked_detection(const SceneSpec& spec, const Assignment& a, const std::string& instance_id,
                                         const std::string& category, Axis axis) {
  const auto* g = spec.find(category);
  if (!g) return nullptr;
  std::vector<const Detection*> sorted;
  for (const auto& d : a.groups[static_cast<std::size_t>(g->group_id)]) sorted.push_back(&d);
  std::stable_sort(sorted.begin(), sorted.end(), [axis](const Detection* l, const Detection* r) {
    const Axis other = axis == Axis::x ? Axis::y : Axis::x;
    return std::pair(l->box.center(axis), l->box.center(other)) < std::pair(r->box.center(axis), r->box.center(other));
  });
  const int rank = instance_index(instance_id);
  if (rank < 0 || static_cast<std::size_t>(rank) >= sorted.size()) return nullptr;
  return sorted[static_cast<std::size_t>(rank)];
}

inline std::string observed_relation(const BoundingBox& s, const BoundingBox& o, Axis axis) {
  const double ds = s.center(axis), dob = o.center(axis);
  if (ds < dob) return axis == Axis::x ? "left_of" : "above";
  if (ds > dob) return axis == Axis::x ? "right_of" : "below";
  return "aligned";
}

}  // namespace detail

inline std::vector<FeedbackItem> check_spatial(const SceneSpec& spec, const SceneGraph& graph,
                                               const Assignment& assignment, double margin) {
  std::vector<FeedbackItem> items;
  for (const auto& c : graph.constraints) {
    const auto* si = graph.find(c.subject);
    const auto* oi = graph.find(c.object);
    if (!si || !oi) continue;
    const Axis axis = axis_of(c.predicate);
    const auto* sd = detail::ranked_detection(spec, assignment, c.subject, si->category, axis);
    const auto* od = detail::ranked_detection(spec, assignment, c.object, oi->category, axis);
    const std::string target = c.subject + " " + to_string(c.predicate) + " " + c.object;
    std::vector<UpdateSignal> pins{{LayoutPin{c.subject, std::nullopt}}, {LayoutPin{c.object, std::nullopt}}};
    if (!sd || !od) {
      items.push_back({"", FeedbackKind::spatial, target, to_string(c.predicate), "undetected", Severity::warning,
                       std::move(pins)});
      continue;
    }
    if (eval_predicate(sd->box, od->box, c.predicate, margin)) continue;
    items.push_back({"", FeedbackKind::spatial, target, to_string(c.predicate),
                     detail::observed_relation(sd->box, od->box, axis), Severity::error, std::move(pins)});
  }
  return items;
}

/// Additions the knowledge table would make to `spec`, skipping rules that
/// contradict what the prompt already states.
inline SpecAdditions compatible_additions(const SceneSpec& spec, const DefaultsTable& table) {
  SpecAdditions out;
  SceneSpec probe = spec;
  for (const auto& rule : table.rules) {
    if (!rule_matches(rule, probe)) continue;
    for (const auto& rel : rule.additions.relations) {
      try {
        if (merge_additions(probe, SpecAdditions{{rel}, {}}, true)) out.relations.push_back(rel);
      } catch (const Error&) {
      }
    }
    for (const auto& attr : rule.additions.attributes)
      if (merge_additions(probe, SpecAdditions{{}, {attr}}, true)) out.attributes.push_back(attr);
  }
  return out;
}

class NumeracyChecker final : public Checker {
 public:
  FeedbackKind kind() const override { return FeedbackKind::numeracy; }
  std::vector<FeedbackItem> check(const CheckContext& ctx) const override {
    return check_numeracy(ctx.spec, ctx.assignment);
  }
};

class AttributeChecker final : public Checker {
 public:
  FeedbackKind kind() const override { return FeedbackKind::attribute; }
  std::vector<FeedbackItem> check(const CheckContext& ctx) const override {
    return check_attributes(ctx.spec, ctx.assignment);
  }
};

class SpatialChecker final : public Checker {
 public:
  FeedbackKind kind() const override { return FeedbackKind::spatial; }
  std::vector<FeedbackItem> check(const CheckContext& ctx) const override {
    return check_spatial(ctx.spec, ctx.graph, ctx.assignment, ctx.margin);
  }
};

/// Flags details the knowledge table knows but the prompt leaves out; the
/// suggested update is a prompt edit adding them.
class FidelityChecker final : public Checker {
 public:
  explicit FidelityChecker(DefaultsTable table) : table_(std::move(table)) {}
  FeedbackKind kind() const override { return FeedbackKind::fidelity; }
  std::vector<FeedbackItem> check(const CheckContext& ctx) const override {
    std::vector<FeedbackItem> items;
    const auto pending = compatible_additions(ctx.spec, table_);
    for (const auto& r : pending.relations) {
      const std::string text = r.subject + " " + to_string(r.predicate) + " " + r.object;
      items.push_back({"", FeedbackKind::fidelity, text, text, "unspecified", Severity::error,
                       {{PromptEdit{std::nullopt, SpecAdditions{{r}, {}}}}}});
    }
    for (const auto& a : pending.attributes) {
      const std::string text = a.category + " " + a.attribute;
      items.push_back({"", FeedbackKind::fidelity, text, text, "unspecified", Severity::error,
                       {{PromptEdit{std::nullopt, SpecAdditions{{}, {a}}}}}});
    }
    return items;
  }

 private:
  DefaultsTable table_;
};

/// Immutable set of feedback functions.
class CheckerRegistry {
 public:
  CheckerRegistry() = default;
  explicit CheckerRegistry(std::vector<std::shared_ptr<const Checker>> checkers) : checkers_(std::move(checkers)) {}

  /// Numeracy, attribute and spatial checkers, plus the fidelity checker
  /// when a knowledge table is given.
  static CheckerRegistry standard(const DefaultsTable* knowledge = nullptr) {
    std::vector<std::shared_ptr<const Checker>> c{std::make_shared<NumeracyChecker>(),
                                                  std::make_shared<AttributeChecker>(),
                                                  std::make_shared<SpatialChecker>()};
    if (knowledge) c.push_back(std::make_shared<FidelityChecker>(*knowledge));
    return CheckerRegistry(std::move(c));
  }

  CheckerRegistry without(FeedbackKind kind) const {
    std::vector<std::shared_ptr<const Checker>> kept;
    for (const auto& c : checkers_)
      if (c->kind() != kind) kept.push_back(c);
    return CheckerRegistry(std::move(kept));
  }

  CheckerRegistry with(std::shared_ptr<const Checker> checker) const {
    auto all = checkers_;
    all.push_back(std::move(checker));
    return CheckerRegistry(std::move(all));
  }

  const std::vector<std::shared_ptr<const Checker>>& checkers() const { return checkers_; }

 private:
  std::vector<std::shared_ptr<const Checker>> checkers_;
};

struct FeedbackConfig {
  DetectorConfig detector;
  double margin = 0.0;
};

/// Sorts items (kind, target, expected, observed), numbers them and sets
/// the satisfied flag.
inline FeedbackReport finalize_report(std::vector<FeedbackItem> items) {
  std::stable_sort(items.begin(), items.end(), [](const FeedbackItem& a, const FeedbackItem& b) {
    return std::tie(a.kind, a.target, a.expected, a.observed) < std::tie(b.kind, b.target, b.expected, b.observed);
  });
  FeedbackReport report;
  for (std::size_t i = 0; i < items.size(); ++i) items[i].item_id = "item-" + std::to_string(i + 1);
  report.satisfied = std::none_of(items.begin(), items.end(),
                                  [](const FeedbackItem& i) { return i.severity == Severity::error; });
  report.items = std::move(items);
  return report;
}

inline std::vector<std::string> spec_categories(const SceneSpec& spec) {
  std::vector<std::string> out;
  for (const auto& g : spec.groups) out.push_back(g.category);
  return out;
}

/// detect -> match -> every registered checker.
inline FeedbackReport compose_feedback(const SceneSpec& spec, const SceneGraph& graph, const RenderedScene& scene,
                                       const FeedbackConfig& cfg, const CheckerRegistry& registry,
                                       const Vocabulary& vocab, std::uint64_t seed) {
  const auto detections = detect(scene, cfg.detector, spec_categories(spec), vocab, seed);
  const auto assignment = match_detections(spec, detections);
  const CheckContext ctx{spec, graph, assignment, cfg.margin};
  std::vector<FeedbackItem> items;
  for (const auto& c : registry.checkers()) {
    auto found = c->check(ctx);
    items.insert(items.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
  }
  return finalize_report(std::move(items));
}

}  // namespace intentloop
