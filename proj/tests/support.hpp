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

#include <set>
#include <string>
#include <vector>

#include "intentloop/prompt.hpp"
#include "intentloop/rng.hpp"
#include "intentloop/vocab.hpp"

namespace intentloop::testing {

inline const Vocabulary& vocab() { return Vocabulary::builtin(); }

/// Random valid spec: 1..max_groups groups with distinct categories,
/// counts within max_count, up to two colors, and relations between
/// distinct groups with no pair related twice.
inline SceneSpec random_spec(Rng& rng, int max_groups = 3, int max_count = 9, int max_relations = 2) {
  const auto& cats = vocab().categories();
  const auto& attrs = vocab().attributes();
  SceneSpec spec;
  const int n = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_groups)));
  std::set<std::size_t> used;
  while (static_cast<int>(spec.groups.size()) < n) {
    const auto c = rng.index(cats.size());
    if (!used.insert(c).second) continue;
    ObjectGroup g{static_cast<int>(spec.groups.size()), cats[c].name,
                  1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_count))), {}};
    const auto n_attr = rng.index(3);
    for (std::size_t k = 0; k < n_attr; ++k) g.attributes.insert(attrs[rng.index(attrs.size())]);
    spec.groups.push_back(std::move(g));
  }
  if (n >= 2) {
    const auto n_rel = rng.index(static_cast<std::size_t>(max_relations) + 1);
    std::set<std::pair<int, int>> pairs;
    for (std::size_t k = 0; k < n_rel; ++k) {
      const int s = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
      const int o = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
      if (s == o || pairs.count({s, o}) || pairs.count({o, s})) continue;
      pairs.insert({s, o});
      spec.relations.push_back({s, all_predicates[rng.index(4)], o});
    }
  }
  return spec;
}

}  // namespace intentloop::testing
