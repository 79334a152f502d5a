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
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "intentloop/error.hpp"
#include "intentloop/geometry.hpp"
#include "intentloop/prompt.hpp"
#include "intentloop/rng.hpp"
#include "intentloop/update.hpp"
#include "intentloop/vocab.hpp"

namespace intentloop {

inline constexpr double solve_margin = 8.0;
inline constexpr double max_overlap_iou = 0.3;
inline constexpr std::size_t max_layout_instances = 16;
inline constexpr int overlap_repair_rounds = 64;

struct Instance {
  std::string instance_id;
  int group_id = 0;
  std::string category;
  std::set<std::string> attributes;
  friend bool operator==(const Instance&, const Instance&) = default;
};

struct InstanceConstraint {
  std::string subject;
  Predicate predicate = Predicate::left_of;
  std::string object;
  friend bool operator==(const InstanceConstraint&, const InstanceConstraint&) = default;
};

struct SceneGraph {
  std::vector<Instance> instances;
  std::vector<InstanceConstraint> constraints;

  const Instance* find(std::string_view id) const {
    for (const auto& i : instances)
      if (i.instance_id == id) return &i;
    return nullptr;
  }

  friend bool operator==(const SceneGraph&, const SceneGraph&) = default;
};

inline std::string make_instance_id(const std::string& category, int index) {
  return category + "#" + std::to_string(index);
}

/// Index encoded in an instance id ("dog#2" -> 2); -1 if malformed.
inline int instance_index(std::string_view id) {
  const auto hash = id.rfind('#');
  if (hash == std::string_view::npos || hash + 1 >= id.size()) return -1;
  int value = 0;
  for (char c : id.substr(hash + 1)) {
    if (c < '0' || c > '9') return -1;
    value = value * 10 + (c - '0');
  }
  return value;
}

inline void to_json(nlohmann::json& j, const InstanceConstraint& c) {
  j = nlohmann::json{{"subject", c.subject}, {"predicate", c.predicate}, {"object", c.object}};
}
inline void from_json(const nlohmann::json& j, InstanceConstraint& c) {
  c.subject = j.at("subject").get<std::string>();
  c.predicate = j.at("predicate").get<Predicate>();
  c.object = j.at("object").get<std::string>();
}
inline void to_json(nlohmann::json& j, const Instance& i) {
  j = nlohmann::json{{"instance_id", i.instance_id},
                     {"group_id", i.group_id},
                     {"category", i.category},
                     {"attributes", i.attributes}};
}
inline void from_json(const nlohmann::json& j, Instance& i) {
  i.instance_id = j.at("instance_id").get<std::string>();
  i.group_id = j.at("group_id").get<int>();
  i.category = j.at("category").get<std::string>();
  i.attributes = j.at("attributes").get<std::set<std::string>>();
}
inline void to_json(nlohmann::json& j, const SceneGraph& g) {
  j = nlohmann::json{{"instances", g.instances}, {"constraints", g.constraints}};
}
inline void from_json(const nlohmann::json& j, SceneGraph& g) {
  g.instances = j.at("instances").get<std::vector<Instance>>();
  g.constraints = j.at("constraints").get<std::vector<InstanceConstraint>>();
}

/// Instances in group order then index order; each group relation expands
/// to every (subject instance, object instance) pair.
inline SceneGraph expand_instances(const SceneSpec& spec) {
  SceneGraph graph;
  for (const auto& g : spec.groups)
    for (int k = 0; k < g.count; ++k)
      graph.instances.push_back({make_instance_id(g.category, k), g.group_id, g.category, g.attributes});
  for (const auto& r : spec.relations) {
    const auto& s = spec.groups[static_cast<std::size_t>(r.subject)];
    const auto& o = spec.groups[static_cast<std::size_t>(r.object)];
    for (int i = 0; i < s.count; ++i)
      for (int k = 0; k < o.count; ++k)
        graph.constraints.push_back(
            {make_instance_id(s.category, i), r.predicate, make_instance_id(o.category, k)});
  }
  return graph;
}

struct LayoutEntry {
  std::string instance_id;
  std::string category;
  BoundingBox box;
  bool pinned = false;
  friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

/// One box per scene-graph instance, in instance order.
struct Layout {
  Canvas canvas;
  std::vector<LayoutEntry> entries;

  const LayoutEntry* find(std::string_view id) const {
    for (const auto& e : entries)
      if (e.instance_id == id) return &e;
    return nullptr;
  }
  LayoutEntry* find(std::string_view id) {
    for (auto& e : entries)
      if (e.instance_id == id) return &e;
    return nullptr;
  }

  bool is_pinned(std::string_view id) const {
    const auto* e = find(id);
    return e && e->pinned;
  }

  std::set<std::string> pinned_ids() const {
    std::set<std::string> out;
    for (const auto& e : entries)
      if (e.pinned) out.insert(e.instance_id);
    return out;
  }

  friend bool operator==(const Layout&, const Layout&) = default;
};

/// Serialized as a flat list of {instance_id, category, x, y, w, h, pinned}.
inline void to_json(nlohmann::json& j, const Layout& layout) {
  j = nlohmann::json::array();
  for (const auto& e : layout.entries)
    j.push_back({{"instance_id", e.instance_id},
                 {"category", e.category},
                 {"x", e.box.x},
                 {"y", e.box.y},
                 {"w", e.box.w},
                 {"h", e.box.h},
                 {"pinned", e.pinned}});
}
inline void from_json(const nlohmann::json& j, Layout& layout) {
  layout = Layout{};
  for (const auto& r : j)
    layout.entries.push_back({r.at("instance_id").get<std::string>(),
                              r.at("category").get<std::string>(),
                              {r.at("x").get<double>(), r.at("y").get<double>(),
                               r.at("w").get<double>(), r.at("h").get<double>()},
                              r.at("pinned").get<bool>()});
}

/// Throws InvariantViolation unless every box is positive and inside the
/// canvas; with a graph, also checks one entry per instance.
inline void validate_layout(const Layout& layout, const SceneGraph* graph = nullptr) {
  for (const auto& e : layout.entries)
    if (!e.box.valid_in(layout.canvas))
      throw Error(ErrorCode::InvariantViolation, "box of " + e.instance_id + " leaves the canvas",
                  nlohmann::json{{"instance_id", e.instance_id}, {"box", e.box}});
  if (graph) {
    if (graph->instances.size() != layout.entries.size())
      throw Error(ErrorCode::InvariantViolation, "layout does not cover the scene graph");
    for (const auto& inst : graph->instances)
      if (!layout.find(inst.instance_id))
        throw Error(ErrorCode::InvariantViolation, "no box for " + inst.instance_id);
  }
}

/// Brute-force check of every instance constraint at the given margin.
inline bool layout_satisfies(const Layout& layout, const SceneGraph& graph, double margin) {
  for (const auto& c : graph.constraints) {
    const auto* s = layout.find(c.subject);
    const auto* o = layout.find(c.object);
    if (!s || !o || !eval_predicate(s->box, o->box, c.predicate, margin)) return false;
  }
  return true;
}

inline double max_pairwise_iou(const Layout& layout) {
  double worst = 0.0;
  for (std::size_t i = 0; i < layout.entries.size(); ++i)
    for (std::size_t k = i + 1; k < layout.entries.size(); ++k)
      worst = std::max(worst, iou(layout.entries[i].box, layout.entries[k].box));
  return worst;
}

namespace detail {

/// Precedence DAG on one axis: an edge u -> v means centroid(u) must be
/// smaller than centroid(v) by more than the margin.
struct AxisOrder {
  std::vector<std::vector<int>> succ;
  std::vector<std::vector<int>> pred;
  std::vector<bool> constrained;
};

inline AxisOrder build_axis_order(const SceneGraph& graph, Axis axis) {
  const auto n = graph.instances.size();
  AxisOrder order{std::vector<std::vector<int>>(n), std::vector<std::vector<int>>(n),
                  std::vector<bool>(n, false)};
  auto index = [&](const std::string& id) {
    for (std::size_t i = 0; i < n; ++i)
      if (graph.instances[i].instance_id == id) return static_cast<int>(i);
    throw Error(ErrorCode::InvalidTarget, "constraint references unknown instance " + id);
  };
  for (const auto& c : graph.constraints) {
    if (axis_of(c.predicate) != axis) continue;
    int s = index(c.subject);
    int o = index(c.object);
    if (!subject_first(c.predicate)) std::swap(s, o);
    auto& out = order.succ[static_cast<std::size_t>(s)];
    if (std::find(out.begin(), out.end(), o) == out.end()) {
      out.push_back(o);
      order.pred[static_cast<std::size_t>(o)].push_back(s);
    }
    order.constrained[static_cast<std::size_t>(s)] = true;
    order.constrained[static_cast<std::size_t>(o)] = true;
  }
  return order;
}

/// A directed cycle as instance indices, or empty.
inline std::vector<int> find_cycle(const AxisOrder& order) {
  const int n = static_cast<int>(order.succ.size());
  std::vector<int> color(static_cast<std::size_t>(n), 0), parent(static_cast<std::size_t>(n), -1);
  std::vector<int> cycle;
  auto dfs = [&](auto&& self, int u) -> bool {
    color[static_cast<std::size_t>(u)] = 1;
    for (int v : order.succ[static_cast<std::size_t>(u)]) {
      if (color[static_cast<std::size_t>(v)] == 1) {
        for (int w = u; w != v; w = parent[static_cast<std::size_t>(w)]) cycle.push_back(w);
        cycle.push_back(v);
        std::reverse(cycle.begin(), cycle.end());
        return true;
      }
      if (color[static_cast<std::size_t>(v)] == 0) {
        parent[static_cast<std::size_t>(v)] = u;
        if (self(self, v)) return true;
      }
    }
    color[static_cast<std::size_t>(u)] = 2;
    return false;
  };
  for (int u = 0; u < n; ++u)
    if (color[static_cast<std::size_t>(u)] == 0 && dfs(dfs, u)) return cycle;
  return {};
}

/// Kahn's algorithm, smallest index first among ready nodes.
inline std::vector<int> topological_order(const AxisOrder& order) {
  const auto n = order.succ.size();
  std::vector<int> indegree(n, 0), out;
  for (const auto& s : order.succ)
    for (int v : s) ++indegree[static_cast<std::size_t>(v)];
  std::set<int> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.insert(static_cast<int>(i));
  while (!ready.empty()) {
    const int u = *ready.begin();
    ready.erase(ready.begin());
    out.push_back(u);
    for (int v : order.succ[static_cast<std::size_t>(u)])
      if (--indegree[static_cast<std::size_t>(v)] == 0) ready.insert(v);
  }
  return out;
}

struct Placement {
  std::vector<double> w, h, cx, cy;
  std::vector<bool> pinned;

  BoundingBox box(std::size_t i) const { return BoundingBox::centered(cx[i], cy[i], w[i], h[i]); }
  double& center(Axis a, std::size_t i) { return a == Axis::x ? cx[i] : cy[i]; }
  double center(Axis a, std::size_t i) const { return a == Axis::x ? cx[i] : cy[i]; }
  double extent(Axis a, std::size_t i) const { return a == Axis::x ? w[i] : h[i]; }
};

// Centroids on one axis must differ by more than the margin; the solver
// keeps one extra unit of slack.
inline constexpr double axis_step = solve_margin + 1.0;

/// Feasible centroid interval of instance i on an axis given the current
/// centroids of its neighbours.
inline std::pair<double, double> feasible_interval(const Placement& p, const AxisOrder& order,
                                                   Axis axis, std::size_t i, double canvas_extent) {
  double lo = p.extent(axis, i) / 2.0;
  double hi = canvas_extent - p.extent(axis, i) / 2.0;
  for (int u : order.pred[i]) lo = std::max(lo, p.center(axis, static_cast<std::size_t>(u)) + axis_step);
  for (int v : order.succ[i]) hi = std::min(hi, p.center(axis, static_cast<std::size_t>(v)) - axis_step);
  return {lo, hi};
}

/// Banded placement along one axis: longest-path rank picks a band, the
/// seeded jitter moves within it, and propagated bounds keep every
/// precedence (including against pinned boxes) satisfiable.
inline void place_axis(Placement& p, const AxisOrder& order, Axis axis, double canvas_extent,
                       Rng& rng, const SceneGraph& graph) {
  const auto n = p.w.size();
  const auto topo = topological_order(order);
  std::vector<double> lower(n), upper(n);
  for (std::size_t i = 0; i < n; ++i) {
    lower[i] = p.extent(axis, i) / 2.0;
    upper[i] = canvas_extent - p.extent(axis, i) / 2.0;
  }
  for (int u : topo) {
    const auto ui = static_cast<std::size_t>(u);
    double need = lower[ui];
    for (int q : order.pred[ui]) need = std::max(need, lower[static_cast<std::size_t>(q)] + axis_step);
    if (p.pinned[ui]) {
      const double c = p.center(axis, ui);
      for (int q : order.pred[ui])
        if (!(lower[static_cast<std::size_t>(q)] + solve_margin < c))
          throw Error(ErrorCode::UnsatisfiableConstraints,
                      "pinned box of " + graph.instances[ui].instance_id + " leaves no room on the " +
                          (axis == Axis::x ? "x" : "y") + " axis");
      lower[ui] = c;
    } else {
      lower[ui] = need;
    }
  }
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const auto ui = static_cast<std::size_t>(*it);
    if (p.pinned[ui]) {
      upper[ui] = p.center(axis, ui);
      continue;
    }
    for (int v : order.succ[ui]) upper[ui] = std::min(upper[ui], upper[static_cast<std::size_t>(v)] - axis_step);
    if (lower[ui] > upper[ui])
      throw Error(ErrorCode::UnsatisfiableConstraints,
                  "no room on the " + std::string(axis == Axis::x ? "x" : "y") + " axis for " +
                      graph.instances[ui].instance_id);
  }

  std::vector<int> rank(n, 0);
  int max_rank = 0;
  for (int u : topo)
    for (int v : order.succ[static_cast<std::size_t>(u)]) {
      rank[static_cast<std::size_t>(v)] = std::max(rank[static_cast<std::size_t>(v)], rank[static_cast<std::size_t>(u)] + 1);
      max_rank = std::max(max_rank, rank[static_cast<std::size_t>(v)]);
    }
  double band_lo = 0.0, band_hi = canvas_extent;
  for (std::size_t i = 0; i < n; ++i) {
    band_lo = std::max(band_lo, p.extent(axis, i) / 2.0);
    band_hi = std::min(band_hi, canvas_extent - p.extent(axis, i) / 2.0);
  }
  const double band = (band_hi - band_lo) / (max_rank + 1);

  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Draw both values for every instance so the stream does not depend on
    // which instances are constrained or pinned.
    const double jitter = rng.uniform(-0.25, 0.25) * band;
    const double free_pos = rng.uniform(lower[i], std::max(lower[i], upper[i]));
    target[i] = order.constrained[i] ? band_lo + band * (rank[i] + 0.5) + jitter : free_pos;
  }
  for (int u : topo) {
    const auto ui = static_cast<std::size_t>(u);
    if (p.pinned[ui]) continue;
    double lo = lower[ui];
    for (int q : order.pred[ui]) lo = std::max(lo, p.center(axis, static_cast<std::size_t>(q)) + axis_step);
    p.center(axis, ui) = std::clamp(target[ui], lo, std::max(lo, upper[ui]));
  }
}

inline double overlap_excess(const Placement& p, std::size_t i, const BoundingBox& candidate) {
  double excess = 0.0;
  for (std::size_t k = 0; k < p.w.size(); ++k) {
    if (k == i) continue;
    excess += std::max(0.0, iou(candidate, p.box(k)) - max_overlap_iou);
  }
  return excess;
}

/// Local search that moves one free box of the worst overlapping pair per
/// round. Returns true when every pair is within the IoU bound.
inline bool repair_overlaps(Placement& p, const AxisOrder& xo, const AxisOrder& yo,
                            const Canvas& canvas, Rng& rng) {
  const auto n = p.w.size();
  for (int round = 0; round < overlap_repair_rounds; ++round) {
    struct Pair {
      double iou;
      std::size_t a, b;
    };
    std::vector<Pair> bad;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = i + 1; k < n; ++k)
        if (double v = iou(p.box(i), p.box(k)); v > max_overlap_iou) bad.push_back({v, i, k});
    if (bad.empty()) return true;
    std::stable_sort(bad.begin(), bad.end(), [](const Pair& l, const Pair& r) { return l.iou > r.iou; });

    bool moved = false;
    for (const auto& pair : bad) {
      for (std::size_t mover : {pair.b, pair.a}) {
        if (p.pinned[mover]) continue;
        const std::size_t other = mover == pair.a ? pair.b : pair.a;
        const auto [xlo, xhi] = feasible_interval(p, xo, Axis::x, mover, canvas.width);
        const auto [ylo, yhi] = feasible_interval(p, yo, Axis::y, mover, canvas.height);
        if (xlo > xhi || ylo > yhi) continue;
        std::vector<std::pair<double, double>> candidates;
        const double sep_x = (p.w[mover] + p.w[other]) / 2.0;
        const double sep_y = (p.h[mover] + p.h[other]) / 2.0;
        for (double f : {0.6, 0.8, 1.0}) {
          candidates.emplace_back(p.cx[other] - f * sep_x, p.cy[mover]);
          candidates.emplace_back(p.cx[other] + f * sep_x, p.cy[mover]);
          candidates.emplace_back(p.cx[mover], p.cy[other] - f * sep_y);
          candidates.emplace_back(p.cx[mover], p.cy[other] + f * sep_y);
        }
        for (int s = 0; s < 16; ++s) candidates.emplace_back(rng.uniform(xlo, xhi), rng.uniform(ylo, yhi));

        double best = overlap_excess(p, mover, p.box(mover));
        std::optional<std::pair<double, double>> choice;
        for (auto [cx, cy] : candidates) {
          cx = std::clamp(cx, xlo, xhi);
          cy = std::clamp(cy, ylo, yhi);
          const double score =
              overlap_excess(p, mover, BoundingBox::centered(cx, cy, p.w[mover], p.h[mover]));
          if (score < best - 1e-12) {
            best = score;
            choice = {cx, cy};
          }
        }
        if (choice) {
          p.cx[mover] = choice->first;
          p.cy[mover] = choice->second;
          moved = true;
          break;
        }
      }
      if (moved) break;
    }
    // A round without a move is not final: the random candidates differ
    // on the next round.
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k)
      if (iou(p.box(i), p.box(k)) > max_overlap_iou) return false;
  return true;
}

/// Deterministic fallback: each axis gets a linear extension of its
/// precedence order and boxes sit on the resulting diagonal grid. Sizes
/// shrink in 10% steps until the overlap bound holds.
inline void diagonal_fallback(Placement& p, const AxisOrder& xo, const AxisOrder& yo, const Canvas& canvas) {
  const auto n = p.w.size();
  auto ranks = [n](const AxisOrder& order) {
    std::vector<std::size_t> r(n);
    const auto topo = topological_order(order);
    for (std::size_t k = 0; k < topo.size(); ++k) r[static_cast<std::size_t>(topo[k])] = k;
    return r;
  };
  const auto rx = ranks(xo), ry = ranks(yo);
  const auto base_w = p.w, base_h = p.h;
  for (double scale = 1.0; scale > 0.05; scale *= 0.9) {
    double max_w = 0.0, max_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p.w[i] = base_w[i] * scale;
      p.h[i] = base_h[i] * scale;
      max_w = std::max(max_w, p.w[i]);
      max_h = std::max(max_h, p.h[i]);
    }
    const double span_x = canvas.width - max_w, span_y = canvas.height - max_h;
    for (std::size_t i = 0; i < n; ++i) {
      p.cx[i] = max_w / 2.0 + span_x * (static_cast<double>(rx[i]) + 0.5) / static_cast<double>(n);
      p.cy[i] = max_h / 2.0 + span_y * (static_cast<double>(ry[i]) + 0.5) / static_cast<double>(n);
    }
    bool ok = span_x / static_cast<double>(n) > axis_step && span_y / static_cast<double>(n) > axis_step;
    for (std::size_t i = 0; ok && i < n; ++i)
      for (std::size_t k = i + 1; ok && k < n; ++k) ok = iou(p.box(i), p.box(k)) <= max_overlap_iou;
    if (ok) return;
  }
}

}  // namespace detail

/// Solves a box layout for `graph` on the 512x512 canvas.
///
/// Every constraint holds at margin 8 and, absent pins, no pair of boxes
/// exceeds IoU 0.3. Box sizes are the category's nominal size scaled by
/// U(0.8, 1.2) per dimension; the diagonal fallback may shrink them further
/// when the scene is too crowded to place otherwise. Instances pinned in
/// `prior` keep their boxes. Deterministic in (graph, seed, prior).
inline Layout solve_layout(const SceneGraph& graph, std::uint64_t seed, const Vocabulary& vocab,
                           const Layout* prior = nullptr) {
  const auto n = graph.instances.size();
  if (n > max_layout_instances)
    throw Error(ErrorCode::TooManyInstances,
                std::to_string(n) + " instances exceed the limit of " + std::to_string(max_layout_instances),
                nlohmann::json{{"instances", n}});
  const auto xo = detail::build_axis_order(graph, Axis::x);
  const auto yo = detail::build_axis_order(graph, Axis::y);
  for (const auto* order : {&xo, &yo}) {
    const auto cycle = detail::find_cycle(*order);
    if (cycle.empty()) continue;
    nlohmann::json ids = nlohmann::json::array();
    std::string text;
    for (int i : cycle) {
      ids.push_back(graph.instances[static_cast<std::size_t>(i)].instance_id);
      text += graph.instances[static_cast<std::size_t>(i)].instance_id + " -> ";
    }
    text += graph.instances[static_cast<std::size_t>(cycle.front())].instance_id;
    const char* axis = order == &xo ? "x" : "y";
    throw Error(ErrorCode::UnsatisfiableConstraints,
                std::string("cyclic constraints on the ") + axis + " axis: " + text,
                nlohmann::json{{"axis", axis}, {"cycle", ids}});
  }

  Layout layout;
  Rng rng(mix_seed(seed, Stream::layout));
  detail::Placement p;
  p.w.resize(n);
  p.h.resize(n);
  p.cx.assign(n, 0.0);
  p.cy.assign(n, 0.0);
  p.pinned.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& info = vocab.category(graph.instances[i].category);
    const double sw = rng.uniform(0.8, 1.2);
    const double sh = rng.uniform(0.8, 1.2);
    p.w[i] = info.width * sw;
    p.h[i] = info.height * sh;
    if (prior) {
      if (const auto* e = prior->find(graph.instances[i].instance_id); e && e->pinned) {
        p.pinned[i] = true;
        p.w[i] = e->box.w;
        p.h[i] = e->box.h;
        p.cx[i] = e->box.cx();
        p.cy[i] = e->box.cy();
      }
    }
  }
  detail::place_axis(p, xo, Axis::x, layout.canvas.width, rng, graph);
  detail::place_axis(p, yo, Axis::y, layout.canvas.height, rng, graph);
  const bool any_pinned = std::any_of(p.pinned.begin(), p.pinned.end(), [](bool b) { return b; });
  if (!detail::repair_overlaps(p, xo, yo, layout.canvas, rng) && !any_pinned)
    detail::diagonal_fallback(p, xo, yo, layout.canvas);

  for (std::size_t i = 0; i < n; ++i) {
    BoundingBox box = p.pinned[i] && prior ? prior->find(graph.instances[i].instance_id)->box : p.box(i);
    layout.entries.push_back({graph.instances[i].instance_id, graph.instances[i].category, box, p.pinned[i]});
  }
  validate_layout(layout, &graph);
  if (!layout_satisfies(layout, graph, solve_margin))
    throw Error(ErrorCode::UnsatisfiableConstraints, "solver could not satisfy the constraints");
  return layout;
}

/// LayoutPin and AddInstanceConstraint against an existing layout.
inline Layout apply_layout_update(const Layout& layout, const SceneGraph& graph, const UpdateAction& update) {
  Layout out = layout;
  if (const auto* pin = std::get_if<LayoutPin>(&update)) {
    auto* entry = out.find(pin->instance_id);
    if (!entry) throw Error(ErrorCode::InvalidTarget, "no layout box for " + pin->instance_id);
    if (pin->box) {
      if (!pin->box->valid_in(out.canvas))
        throw Error(ErrorCode::InvariantViolation, "box for " + pin->instance_id + " leaves the canvas",
                    nlohmann::json{{"instance_id", pin->instance_id}, {"box", *pin->box}});
      entry->box = *pin->box;
    }
    entry->pinned = true;
  } else if (const auto* add = std::get_if<AddInstanceConstraint>(&update)) {
    bool found = false;
    for (const auto& inst : graph.instances) {
      if (inst.group_id != add->group_id) continue;
      found = true;
      if (auto* entry = out.find(inst.instance_id)) entry->pinned = true;
    }
    if (!found) throw Error(ErrorCode::InvalidTarget, "no group " + std::to_string(add->group_id));
  } else {
    throw Error(ErrorCode::InvalidUpdate, std::string("not a layout update: ") + type_name(update));
  }
  validate_layout(out);
  return out;
}

}  // namespace intentloop
