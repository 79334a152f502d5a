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
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "intentloop/error.hpp"
#include "intentloop/geometry.hpp"
#include "intentloop/layout.hpp"
#include "intentloop/prompt.hpp"
#include "intentloop/rng.hpp"
#include "intentloop/update.hpp"
#include "intentloop/vocab.hpp"

namespace intentloop {

/// Multipliers on the base error probabilities, applied when the matching
/// conditioning is present: a layout attenuates numeracy (omit, duplicate),
/// spatial (relation ignore) and attribute channels; any attribute pin in
/// the scene further attenuates the attribute channels of unpinned
/// attributes.
struct CondFactors {
  double numeracy = 1.0;
  double spatial = 1.0;
  double attribute = 1.0;
  double pinned_attribute = 1.0;
  friend bool operator==(const CondFactors&, const CondFactors&) = default;
};

/// Predicate distribution used when a relation is ignored.
struct BiasPrior {
  double above = 0.6;
  double below = 0.1;
  double left_of = 0.15;
  double right_of = 0.15;

  double total() const { return above + below + left_of + right_of; }

  Predicate sample(Rng& rng) const {
    double u = rng.uniform() * total();
    if ((u -= above) < 0) return Predicate::above;
    if ((u -= below) < 0) return Predicate::below;
    if ((u -= left_of) < 0) return Predicate::left_of;
    return Predicate::right_of;
  }

  friend bool operator==(const BiasPrior&, const BiasPrior&) = default;
};

struct ErrorModelConfig {
  double p_omit = 0.0;
  double p_dup = 0.0;
  double p_attr_swap = 0.0;
  double p_attr_drop = 0.0;
  double p_rel_ignore = 0.0;
  double jitter_sigma = 0.0;
  CondFactors cond_factors;
  BiasPrior bias_prior;

  static ErrorModelConfig zero() { return {}; }

  bool error_free() const {
    return p_omit == 0 && p_dup == 0 && p_attr_swap == 0 && p_attr_drop == 0 && p_rel_ignore == 0 &&
           jitter_sigma == 0;
  }

  void validate() const {
    auto prob = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorCode::InvalidConfig, std::string(name) + " must lie in [0, 1]");
    };
    prob(p_omit, "p_omit");
    prob(p_dup, "p_dup");
    prob(p_attr_swap, "p_attr_swap");
    prob(p_attr_drop, "p_attr_drop");
    prob(p_rel_ignore, "p_rel_ignore");
    prob(p_omit + p_dup, "p_omit + p_dup");
    prob(p_attr_swap + p_attr_drop, "p_attr_swap + p_attr_drop");
    prob(cond_factors.numeracy, "cond_factors.numeracy");
    prob(cond_factors.spatial, "cond_factors.spatial");
    prob(cond_factors.attribute, "cond_factors.attribute");
    prob(cond_factors.pinned_attribute, "cond_factors.pinned_attribute");
    if (!(jitter_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "jitter_sigma must be >= 0");
    for (double w : {bias_prior.above, bias_prior.below, bias_prior.left_of, bias_prior.right_of})
      if (!(w >= 0.0)) throw Error(ErrorCode::InvalidConfig, "bias_prior weights must be >= 0");
    if (!(bias_prior.total() > 0.0)) throw Error(ErrorCode::InvalidConfig, "bias_prior is empty");
  }

  friend bool operator==(const ErrorModelConfig&, const ErrorModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const CondFactors& c) {
  j = nlohmann::json{{"numeracy", c.numeracy},
                     {"spatial", c.spatial},
                     {"attribute", c.attribute},
                     {"pinned_attribute", c.pinned_attribute}};
}
inline void from_json(const nlohmann::json& j, CondFactors& c) {
  c.numeracy = j.value("numeracy", 1.0);
  c.spatial = j.value("spatial", 1.0);
  c.attribute = j.value("attribute", 1.0);
  c.pinned_attribute = j.value("pinned_attribute", 1.0);
}
inline void to_json(nlohmann::json& j, const BiasPrior& b) {
  j = nlohmann::json{{"above", b.above}, {"below", b.below}, {"left_of", b.left_of}, {"right_of", b.right_of}};
}
inline void from_json(const nlohmann::json& j, BiasPrior& b) {
  BiasPrior d;
  b.above = j.value("above", d.above);
  b.below = j.value("below", d.below);
  b.left_of = j.value("left_of", d.left_of);
  b.right_of = j.value("right_of", d.right_of);
}
inline void to_json(nlohmann::json& j, const ErrorModelConfig& c) {
  j = nlohmann::json{{"p_omit", c.p_omit},
                     {"p_dup", c.p_dup},
                     {"p_attr_swap", c.p_attr_swap},
                     {"p_attr_drop", c.p_attr_drop},
                     {"p_rel_ignore", c.p_rel_ignore},
                     {"jitter_sigma", c.jitter_sigma},
                     {"cond_factors", c.cond_factors},
                     {"bias_prior", c.bias_prior}};
}
inline void from_json(const nlohmann::json& j, ErrorModelConfig& c) {
  c.p_omit = j.value("p_omit", 0.0);
  c.p_dup = j.value("p_dup", 0.0);
  c.p_attr_swap = j.value("p_attr_swap", 0.0);
  c.p_attr_drop = j.value("p_attr_drop", 0.0);
  c.p_rel_ignore = j.value("p_rel_ignore", 0.0);
  c.jitter_sigma = j.value("jitter_sigma", 0.0);
  c.cond_factors = j.value("cond_factors", CondFactors{});
  c.bias_prior = j.value("bias_prior", BiasPrior{});
}

enum class Channel { omit, duplicate, attr_swap, attr_drop, rel_ignore, jitter };

NLOHMANN_JSON_SERIALIZE_ENUM(Channel, {
    {Channel::omit, "omit"},
    {Channel::duplicate, "duplicate"},
    {Channel::attr_swap, "attr_swap"},
    {Channel::attr_drop, "attr_drop"},
    {Channel::rel_ignore, "rel_ignore"},
    {Channel::jitter, "jitter"},
})

/// A scripted fault: forces one channel on one instance regardless of the
/// sampled outcome (pins still win). Supports omit, duplicate and
/// attr_drop.
struct ForcedFault {
  Channel channel = Channel::duplicate;
  std::string instance_id;
  std::string attribute;  // attr_drop only; empty drops the first attribute
  friend bool operator==(const ForcedFault&, const ForcedFault&) = default;
};

inline void to_json(nlohmann::json& j, const ForcedFault& f) {
  j = nlohmann::json{{"channel", f.channel}, {"instance_id", f.instance_id}, {"attribute", f.attribute}};
}
inline void from_json(const nlohmann::json& j, ForcedFault& f) {
  f.channel = j.at("channel").get<Channel>();
  f.instance_id = j.at("instance_id").get<std::string>();
  f.attribute = j.value("attribute", "");
}

using AttributePinSet = std::set<std::pair<std::string, std::string>>;

struct GeneratorInput {
  SceneSpec spec;
  SceneGraph graph;
  std::optional<Layout> layout;
  AttributePinSet attribute_pins;  // (instance_id, attribute)
  std::uint64_t seed = 0;
  std::vector<ForcedFault> forced;
};

inline const char* fill_for(const std::set<std::string>& attributes) {
  static const std::map<std::string, const char*, std::less<>> colors{
      {"black", "#202020"}, {"white", "#f4f4f4"}, {"red", "#d62728"},  {"yellow", "#f2d024"},
      {"blue", "#1f5fbf"},  {"green", "#2ca02c"}, {"brown", "#8c564b"}, {"gray", "#8c8c8c"}};
  for (const auto& a : attributes)
    if (auto it = colors.find(a); it != colors.end()) return it->second;
  return "#8c8c8c";
}

struct RenderedEntity {
  std::string entity_id;
  std::string category;
  std::set<std::string> attributes;
  BoundingBox box;

  std::string fill() const { return fill_for(attributes); }
  friend bool operator==(const RenderedEntity&, const RenderedEntity&) = default;
};

struct RenderedScene {
  Canvas canvas;
  std::vector<RenderedEntity> entities;

  const RenderedEntity* find(std::string_view id) const {
    for (const auto& e : entities)
      if (e.entity_id == id) return &e;
    return nullptr;
  }
  RenderedEntity* find(std::string_view id) {
    for (auto& e : entities)
      if (e.entity_id == id) return &e;
    return nullptr;
  }

  void validate() const {
    std::set<std::string> ids;
    for (const auto& e : entities) {
      if (!ids.insert(e.entity_id).second)
        throw Error(ErrorCode::InvariantViolation, "duplicate entity id " + e.entity_id);
      if (!e.box.valid_in(canvas))
        throw Error(ErrorCode::InvariantViolation, "entity " + e.entity_id + " leaves the canvas",
                    nlohmann::json{{"entity_id", e.entity_id}, {"box", e.box}});
    }
  }

  friend bool operator==(const RenderedScene&, const RenderedScene&) = default;
};

inline void to_json(nlohmann::json& j, const RenderedEntity& e) {
  j = nlohmann::json{{"entity_id", e.entity_id},
                     {"category", e.category},
                     {"attributes", e.attributes},
                     {"box", e.box},
                     {"fill", e.fill()}};
}
inline void from_json(const nlohmann::json& j, RenderedEntity& e) {
  e.entity_id = j.at("entity_id").get<std::string>();
  e.category = j.at("category").get<std::string>();
  e.attributes = j.at("attributes").get<std::set<std::string>>();
  e.box = j.at("box").get<BoundingBox>();
}
inline void to_json(nlohmann::json& j, const RenderedScene& s) {
  j = nlohmann::json{{"canvas", {{"width", s.canvas.width}, {"height", s.canvas.height}}},
                     {"entities", s.entities}};
}
inline void from_json(const nlohmann::json& j, RenderedScene& s) {
  s.canvas.width = j.at("canvas").at("width").get<double>();
  s.canvas.height = j.at("canvas").at("height").get<double>();
  s.entities = j.at("entities").get<std::vector<RenderedEntity>>();
}

/// One deviation from the faithful render. Field use by channel:
///   omit       targets=[instance]
///   duplicate  targets=[instance], entity_id=new entity, box
///   attr_swap  targets=[a, b], attribute (a's, moved to b), other_attribute (b's)
///   attr_drop  targets=[entity], attribute
///   rel_ignore targets=[moved, anchor], predicate realized subject->object, box
///   jitter     targets=[entity], box
struct InjectedError {
  Channel channel = Channel::omit;
  std::vector<std::string> targets;
  std::string entity_id;
  std::string attribute;
  std::string other_attribute;
  std::optional<Predicate> predicate;
  std::optional<BoundingBox> box;
  friend bool operator==(const InjectedError&, const InjectedError&) = default;
};

struct GenerationTrace {
  std::vector<InjectedError> injected;

  std::size_t count(Channel c) const {
    return static_cast<std::size_t>(
        std::count_if(injected.begin(), injected.end(), [c](const InjectedError& e) { return e.channel == c; }));
  }
  friend bool operator==(const GenerationTrace&, const GenerationTrace&) = default;
};

inline void to_json(nlohmann::json& j, const InjectedError& e) {
  nlohmann::json details = nlohmann::json::object();
  if (!e.entity_id.empty()) details["entity_id"] = e.entity_id;
  if (!e.attribute.empty()) details["attribute"] = e.attribute;
  if (!e.other_attribute.empty()) details["other_attribute"] = e.other_attribute;
  if (e.predicate) details["predicate"] = *e.predicate;
  if (e.box) details["box"] = *e.box;
  j = nlohmann::json{{"channel", e.channel}, {"targets", e.targets}, {"details", details}};
}
inline void from_json(const nlohmann::json& j, InjectedError& e) {
  e.channel = j.at("channel").get<Channel>();
  e.targets = j.at("targets").get<std::vector<std::string>>();
  const auto& d = j.at("details");
  e.entity_id = d.value("entity_id", "");
  e.attribute = d.value("attribute", "");
  e.other_attribute = d.value("other_attribute", "");
  if (d.contains("predicate")) e.predicate = d["predicate"].get<Predicate>();
  if (d.contains("box")) e.box = d["box"].get<BoundingBox>();
}
inline void to_json(nlohmann::json& j, const GenerationTrace& t) { j = nlohmann::json{{"injected", t.injected}}; }
inline void from_json(const nlohmann::json& j, GenerationTrace& t) {
  t.injected = j.at("injected").get<std::vector<InjectedError>>();
}

/// Instance an entity was rendered from ("dog#0.dup" -> "dog#0").
inline std::string source_instance(std::string_view entity_id) {
  return std::string(entity_id.substr(0, entity_id.find('.')));
}

namespace detail {

/// Layout the generator renders from: the given one, or a self-placed
/// layout that honours the constraints when they are solvable.
inline Layout base_layout(const GeneratorInput& input, const Vocabulary& vocab) {
  if (input.layout) return *input.layout;
  const auto seed = mix_seed(input.seed, Stream::self_place);
  try {
    return solve_layout(input.graph, seed, vocab);
  } catch (const Error&) {
  }
  SceneGraph loose = input.graph;
  loose.constraints.clear();
  if (loose.instances.size() <= max_layout_instances) return solve_layout(loose, seed, vocab);
  Layout layout;
  Rng rng(seed);
  for (const auto& inst : loose.instances) {
    const auto& info = vocab.category(inst.category);
    const double w = info.width * rng.uniform(0.8, 1.2), h = info.height * rng.uniform(0.8, 1.2);
    layout.entries.push_back({inst.instance_id, inst.category,
                              {rng.uniform(0.0, layout.canvas.width - w), rng.uniform(0.0, layout.canvas.height - h), w, h},
                              false});
  }
  return layout;
}

inline RenderedScene faithful_from(const SceneGraph& graph, const Layout& layout) {
  RenderedScene scene;
  scene.canvas = layout.canvas;
  for (const auto& inst : graph.instances) {
    const auto* entry = layout.find(inst.instance_id);
    if (!entry) throw Error(ErrorCode::InvariantViolation, "layout does not cover " + inst.instance_id);
    scene.entities.push_back({inst.instance_id, inst.category, inst.attributes, entry->box});
  }
  return scene;
}

/// Places `mover` against `anchor` so that `p(mover, anchor)` holds when the
/// canvas allows it.
inline BoundingBox place_relative(const BoundingBox& mover, const BoundingBox& anchor, Predicate p,
                                  double gap_scale, double perp_offset, const Canvas& canvas) {
  const Axis axis = axis_of(p);
  const double gap = (mover.extent(axis) + anchor.extent(axis)) / 2.0 * gap_scale;
  const double sign = subject_first(p) ? -1.0 : 1.0;
  double cx = mover.cx(), cy = mover.cy();
  if (axis == Axis::x) {
    cx = anchor.cx() + sign * gap;
    cy = anchor.cy() + perp_offset * anchor.h / 2.0;
  } else {
    cy = anchor.cy() + sign * gap;
    cx = anchor.cx() + perp_offset * anchor.w / 2.0;
  }
  return BoundingBox::centered(cx, cy, mover.w, mover.h).clamped_to(canvas);
}

}  // namespace detail

/// The render with no errors: one entity per instance on the base layout.
inline RenderedScene faithful_render(const GeneratorInput& input, const Vocabulary& vocab) {
  return detail::faithful_from(input.graph, detail::base_layout(input, vocab));
}

/// Applies ledger entries in order to a faithful render.
inline RenderedScene replay_ledger(RenderedScene scene, const GenerationTrace& trace) {
  auto require = [&](const std::string& id) -> RenderedEntity& {
    auto* e = scene.find(id);
    if (!e) throw Error(ErrorCode::InvalidTarget, "ledger references missing entity " + id);
    return *e;
  };
  for (const auto& err : trace.injected) {
    switch (err.channel) {
      case Channel::omit: {
        require(err.targets.at(0));
        std::erase_if(scene.entities, [&](const RenderedEntity& e) { return e.entity_id == err.targets[0]; });
        break;
      }
      case Channel::duplicate: {
        auto it = std::find_if(scene.entities.begin(), scene.entities.end(),
                               [&](const RenderedEntity& e) { return e.entity_id == err.targets.at(0); });
        if (it == scene.entities.end()) throw Error(ErrorCode::InvalidTarget, "ledger references missing entity");
        RenderedEntity copy = *it;
        copy.entity_id = err.entity_id;
        copy.box = err.box.value();
        scene.entities.insert(std::next(it), std::move(copy));
        break;
      }
      case Channel::attr_swap: {
        auto& a = require(err.targets.at(0));
        auto& b = require(err.targets.at(1));
        a.attributes.erase(err.attribute);
        a.attributes.insert(err.other_attribute);
        b.attributes.erase(err.other_attribute);
        b.attributes.insert(err.attribute);
        break;
      }
      case Channel::attr_drop: require(err.targets.at(0)).attributes.erase(err.attribute); break;
      case Channel::rel_ignore:
      case Channel::jitter: require(err.targets.at(0)).box = err.box.value(); break;
    }
  }
  return scene;
}

/// Simulated generative model.
///
/// Starts from the faithful render and runs the error channels in a fixed
/// order (numeracy, attribute, spatial, jitter), recording every deviation
/// in the returned ledger. Effective probability per channel is the base
/// probability times the applicable cond_factors. Pinned layout instances
/// are never omitted, duplicated or moved and pinned attributes are never
/// swapped or dropped. Deterministic in (input, cfg).
inline std::pair<RenderedScene, GenerationTrace> generate(const GeneratorInput& input, const ErrorModelConfig& cfg,
                                                          const Vocabulary& vocab) {
  cfg.validate();
  if (input.layout) validate_layout(*input.layout, &input.graph);
  const Layout base = detail::base_layout(input, vocab);
  const bool has_layout = input.layout.has_value();
  const auto& cf = cfg.cond_factors;
  const double f_num = has_layout ? cf.numeracy : 1.0;
  const double f_spatial = has_layout ? cf.spatial : 1.0;
  const double f_attr = (has_layout ? cf.attribute : 1.0) * (input.attribute_pins.empty() ? 1.0 : cf.pinned_attribute);
  const double p_omit = cfg.p_omit * f_num, p_dup = cfg.p_dup * f_num;
  const double p_swap = cfg.p_attr_swap * f_attr, p_drop = cfg.p_attr_drop * f_attr;
  const double p_rel = cfg.p_rel_ignore * f_spatial;

  auto forced = [&](Channel c, const std::string& id) -> const ForcedFault* {
    for (const auto& f : input.forced)
      if (f.channel == c && f.instance_id == id) return &f;
    return nullptr;
  };
  auto pinned = [&](const std::string& entity_id) { return base.is_pinned(entity_id); };
  auto attr_pinned = [&](const std::string& entity_id, const std::string& attr) {
    return input.attribute_pins.count({entity_id, attr}) > 0;
  };

  Rng rng(mix_seed(input.seed, Stream::generate));
  RenderedScene scene;
  scene.canvas = base.canvas;
  GenerationTrace trace;

  // Numeracy: one categorical draw per instance (keep / omit / duplicate).
  for (const auto& inst : input.graph.instances) {
    const double u = rng.uniform();
    const double ox = rng.uniform(-1.0, 1.0), oy = rng.uniform(-1.0, 1.0);
    const auto& box = base.find(inst.instance_id)->box;
    enum { keep, omit, dup } outcome = u < p_omit ? omit : (u < p_omit + p_dup ? dup : keep);
    if (forced(Channel::omit, inst.instance_id)) outcome = omit;
    if (forced(Channel::duplicate, inst.instance_id)) outcome = dup;
    if (pinned(inst.instance_id)) outcome = keep;
    if (outcome == omit) {
      trace.injected.push_back({Channel::omit, {inst.instance_id}});
      continue;
    }
    scene.entities.push_back({inst.instance_id, inst.category, inst.attributes, box});
    if (outcome == dup) {
      const double dx = 0.5 * ox * box.w;
      const double dy = 0.25 * oy * box.h;
      BoundingBox copy = BoundingBox{box.x + dx, box.y + dy, box.w, box.h}.clamped_to(scene.canvas);
      const std::string id = inst.instance_id + ".dup";
      scene.entities.push_back({id, inst.category, inst.attributes, copy});
      InjectedError e{Channel::duplicate, {inst.instance_id}};
      e.entity_id = id;
      e.box = copy;
      trace.injected.push_back(std::move(e));
    }
  }

  // Attribute binding: each entity takes part in at most one attribute
  // event, so every event maps to distinct missing (entity, attribute) pairs.
  std::vector<bool> touched(scene.entities.size(), false);
  for (std::size_t i = 0; i < scene.entities.size(); ++i) {
    if (touched[i]) continue;
    auto& e = scene.entities[i];
    if (const auto* f = forced(Channel::attr_drop, e.entity_id); f && !e.attributes.empty()) {
      const std::string attr = f->attribute.empty() ? *e.attributes.begin() : f->attribute;
      if (e.attributes.count(attr) && !attr_pinned(e.entity_id, attr)) {
        e.attributes.erase(attr);
        touched[i] = true;
        InjectedError err{Channel::attr_drop, {e.entity_id}};
        err.attribute = attr;
        trace.injected.push_back(std::move(err));
        continue;
      }
    }
    const std::vector<std::string> attrs(e.attributes.begin(), e.attributes.end());
    for (const auto& x : attrs) {
      const double u = rng.uniform();
      if (attr_pinned(e.entity_id, x)) continue;
      if (u < p_swap) {
        struct Candidate {
          std::size_t index;
          std::vector<std::string> give;
        };
        std::vector<Candidate> candidates;
        for (std::size_t k = 0; k < scene.entities.size(); ++k) {
          if (k == i || touched[k]) continue;
          const auto& other = scene.entities[k];
          if (other.attributes.count(x)) continue;
          std::vector<std::string> give;
          for (const auto& y : other.attributes)
            if (!attr_pinned(other.entity_id, y) && !e.attributes.count(y)) give.push_back(y);
          if (!give.empty()) candidates.push_back({k, std::move(give)});
        }
        if (candidates.empty()) continue;
        const auto& pick = candidates[rng.index(candidates.size())];
        const std::string y = pick.give[rng.index(pick.give.size())];
        auto& b = scene.entities[pick.index];
        e.attributes.erase(x);
        e.attributes.insert(y);
        b.attributes.erase(y);
        b.attributes.insert(x);
        touched[i] = touched[pick.index] = true;
        InjectedError err{Channel::attr_swap, {e.entity_id, b.entity_id}};
        err.attribute = x;
        err.other_attribute = y;
        trace.injected.push_back(std::move(err));
        break;
      }
      if (u < p_swap + p_drop) {
        e.attributes.erase(x);
        touched[i] = true;
        InjectedError err{Channel::attr_drop, {e.entity_id}};
        err.attribute = x;
        trace.injected.push_back(std::move(err));
        break;
      }
    }
  }

  // Spatial: an ignored constraint re-draws the realized predicate from the
  // bias prior and moves one free endpoint to realize it.
  for (const auto& c : input.graph.constraints) {
    const double u = rng.uniform();
    const Predicate realized = cfg.bias_prior.sample(rng);
    const double gap_scale = rng.uniform(1.1, 1.6);
    const double perp = rng.uniform(-0.5, 0.5);
    if (u >= p_rel) continue;
    auto* s = scene.find(c.subject);
    auto* o = scene.find(c.object);
    if (!s || !o) continue;
    RenderedEntity* mover = nullptr;
    const RenderedEntity* anchor = nullptr;
    Predicate p = realized;
    if (!pinned(s->entity_id)) {
      mover = s;
      anchor = o;
    } else if (!pinned(o->entity_id)) {
      mover = o;
      anchor = s;
      p = inverse(realized);
    } else {
      continue;
    }
    const BoundingBox moved = detail::place_relative(mover->box, anchor->box, p, gap_scale, perp, scene.canvas);
    if (moved == mover->box) continue;
    mover->box = moved;
    InjectedError err{Channel::rel_ignore, {mover->entity_id, anchor->entity_id}};
    err.predicate = realized;
    err.box = moved;
    trace.injected.push_back(std::move(err));
  }

  // Fidelity jitter on centroids.
  if (cfg.jitter_sigma > 0.0) {
    for (auto& e : scene.entities) {
      const double dx = rng.truncated_normal(cfg.jitter_sigma);
      const double dy = rng.truncated_normal(cfg.jitter_sigma);
      if (pinned(e.entity_id)) continue;
      const BoundingBox moved = BoundingBox{e.box.x + dx, e.box.y + dy, e.box.w, e.box.h}.clamped_to(scene.canvas);
      if (moved == e.box) continue;
      e.box = moved;
      InjectedError err{Channel::jitter, {e.entity_id}};
      err.box = moved;
      trace.injected.push_back(std::move(err));
    }
  }
  return {std::move(scene), std::move(trace)};
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

/// Standalone SVG: canvas background, then one labelled rectangle per
/// entity ordered by entity_id.
inline std::string render_svg(const RenderedScene& scene) {
  std::vector<const RenderedEntity*> ordered;
  for (const auto& e : scene.entities) ordered.push_back(&e);
  std::sort(ordered.begin(), ordered.end(),
            [](const RenderedEntity* a, const RenderedEntity* b) { return a->entity_id < b->entity_id; });
  using detail::fmt2;
  std::ostringstream out;
  out << R"(<?xml version="1.0" encoding="UTF-8"?>)" << '\n'
      << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << fmt2(scene.canvas.width) << R"(" height=")"
      << fmt2(scene.canvas.height) << R"(" viewBox="0 0 )" << fmt2(scene.canvas.width) << ' '
      << fmt2(scene.canvas.height) << R"(">)" << '\n'
      << R"(  <rect class="canvas" x="0" y="0" width=")" << fmt2(scene.canvas.width) << R"(" height=")"
      << fmt2(scene.canvas.height) << R"(" fill="#fafafa"/>)" << '\n';
  for (const auto* e : ordered) {
    const auto id = detail::xml_escape(e->entity_id);
    out << R"(  <g class="entity" id=")" << id << R"(">)" << '\n'
        << R"(    <rect x=")" << fmt2(e->box.x) << R"(" y=")" << fmt2(e->box.y) << R"(" width=")" << fmt2(e->box.w)
        << R"(" height=")" << fmt2(e->box.h) << R"(" fill=")" << e->fill()
        << R"(" fill-opacity="0.75" stroke="#333333" stroke-width="1.5"/>)" << '\n'
        << R"(    <text x=")" << fmt2(e->box.cx()) << R"(" y=")" << fmt2(e->box.cy())
        << R"(" text-anchor="middle" dominant-baseline="middle" font-family="sans-serif" font-size="12">)"
        << detail::xml_escape(e->category) << "</text>\n"
        << "  </g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

/// Applies exactly one content mutation and re-validates the scene.
inline RenderedScene edit_content(const RenderedScene& scene, const ContentEdit& edit) {
  RenderedScene out = scene;
  auto require = [&]() -> RenderedEntity& {
    auto* e = out.find(edit.entity_id);
    if (!e) throw Error(ErrorCode::InvalidTarget, "no entity " + edit.entity_id);
    return *e;
  };
  auto checked_box = [&]() {
    if (!edit.box) throw Error(ErrorCode::InvalidUpdate, "edit needs a box");
    if (!edit.box->valid_in(out.canvas))
      throw Error(ErrorCode::InvariantViolation, "box for " + edit.entity_id + " leaves the canvas",
                  nlohmann::json{{"entity_id", edit.entity_id}, {"box", *edit.box}});
    return *edit.box;
  };
  switch (edit.op) {
    case ContentOp::remove:
      require();
      std::erase_if(out.entities, [&](const RenderedEntity& e) { return e.entity_id == edit.entity_id; });
      break;
    case ContentOp::set_attribute: {
      auto& e = require();
      if (!edit.from.empty()) e.attributes.erase(edit.from);
      if (!edit.to.empty()) e.attributes.insert(edit.to);
      break;
    }
    case ContentOp::move: require().box = checked_box(); break;
    case ContentOp::add:
      if (out.find(edit.entity_id)) throw Error(ErrorCode::InvalidTarget, "entity exists: " + edit.entity_id);
      if (edit.category.empty()) throw Error(ErrorCode::InvalidUpdate, "added entity needs a category");
      out.entities.push_back({edit.entity_id, edit.category, edit.attributes, checked_box()});
      break;
  }
  out.validate();
  return out;
}

}  // namespace intentloop
