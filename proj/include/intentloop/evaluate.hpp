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

#include "intentloop/generator.hpp"
#include "intentloop/layout.hpp"
#include "intentloop/prompt.hpp"

namespace intentloop {

/// Per-dimension verdicts from reading scene entities directly. A dimension
/// that does not apply to the spec (no attributes, no relations) passes.
struct Evaluation {
  bool numeracy = true;
  bool attribute = true;
  bool spatial = true;

  /// A prompt is satisfied only when every dimension holds.
  bool pass() const { return numeracy && attribute && spatial; }
  friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

inline void to_json(nlohmann::json& j, const Evaluation& e) {
  j = nlohmann::json{{"numeracy", e.numeracy}, {"attribute", e.attribute}, {"spatial", e.spatial}};
}
inline void from_json(const nlohmann::json& j, Evaluation& e) {
  e.numeracy = j.at("numeracy").get<bool>();
  e.attribute = j.at("attribute").get<bool>();
  e.spatial = j.at("spatial").get<bool>();
}

/// numeracy: per-category entity counts equal the spec counts.
/// attribute: every entity of a spec category carries all the group's attributes.
/// spatial: every expanded constraint holds between the entities carrying
/// the instance ids, at margin 0; a missing endpoint fails.
inline Evaluation evaluate_prompt(const SceneSpec& spec, const RenderedScene& scene) {
  Evaluation ev;
  for (const auto& g : spec.groups) {
    int n = 0;
    for (const auto& e : scene.entities) {
      if (e.category != g.category) continue;
      ++n;
      for (const auto& a : g.attributes)
        if (!e.attributes.count(a)) ev.attribute = false;
    }
    if (n != g.count) ev.numeracy = false;
  }
  for (const auto& c : expand_instances(spec).constraints) {
    const auto* s = scene.find(c.subject);
    const auto* o = scene.find(c.object);
    if (!s || !o || !eval_predicate(s->box, o->box, c.predicate, 0.0)) ev.spatial = false;
  }
  return ev;
}

}  // namespace intentloop
