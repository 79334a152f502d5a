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
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "json.hpp"

namespace intentloop {

enum class Predicate { left_of, right_of, above, below };

inline constexpr std::array<Predicate, 4> all_predicates{
    Predicate::left_of, Predicate::right_of, Predicate::above, Predicate::below};

inline const char* to_string(Predicate p) {
  switch (p) {
    case Predicate::left_of: return "left_of";
    case Predicate::right_of: return "right_of";
    case Predicate::above: return "above";
    case Predicate::below: return "below";
  }
  return "?";
}

inline std::optional<Predicate> predicate_from_string(std::string_view s) {
  for (auto p : all_predicates)
    if (s == to_string(p)) return p;
  return std::nullopt;
}

enum class Axis { x, y };

inline Axis axis_of(Predicate p) {
  return (p == Predicate::left_of || p == Predicate::right_of) ? Axis::x : Axis::y;
}

/// p(a, b) holds iff inverse(p)(b, a) holds.
inline Predicate inverse(Predicate p) {
  switch (p) {
    case Predicate::left_of: return Predicate::right_of;
    case Predicate::right_of: return Predicate::left_of;
    case Predicate::above: return Predicate::below;
    case Predicate::below: return Predicate::above;
  }
  return p;
}

/// True when p places its subject at the smaller coordinate of its axis.
inline bool subject_first(Predicate p) {
  return p == Predicate::left_of || p == Predicate::above;
}

NLOHMANN_JSON_SERIALIZE_ENUM(Predicate, {
    {Predicate::left_of, "left_of"},
    {Predicate::right_of, "right_of"},
    {Predicate::above, "above"},
    {Predicate::below, "below"},
})

struct Canvas {
  double width = 512.0;
  double height = 512.0;
  friend bool operator==(const Canvas&, const Canvas&) = default;
};

/// Axis-aligned box; origin top-left, y grows downward.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + w / 2.0; }
  double cy() const { return y + h / 2.0; }
  double center(Axis axis) const { return axis == Axis::x ? cx() : cy(); }
  double extent(Axis axis) const { return axis == Axis::x ? w : h; }
  double area() const { return w * h; }

  bool valid_in(const Canvas& canvas) const {
    return w > 0.0 && h > 0.0 && x >= 0.0 && y >= 0.0 && x + w <= canvas.width &&
           y + h <= canvas.height;
  }

  static BoundingBox centered(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, w, h};
  }

  /// Shifts the box (size kept) so it lies inside the canvas.
  BoundingBox clamped_to(const Canvas& canvas) const {
    BoundingBox b = *this;
    b.w = std::min(b.w, canvas.width);
    b.h = std::min(b.h, canvas.height);
    b.x = std::clamp(b.x, 0.0, canvas.width - b.w);
    b.y = std::clamp(b.y, 0.0, canvas.height - b.h);
    return b;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

  friend std::ostream& operator<<(std::ostream& o, const BoundingBox& b) {
    return o << "{x: " << b.x << ", y: " << b.y << ", w: " << b.w << ", h: " << b.h << "}";
  }
};

inline void to_json(nlohmann::json& j, const BoundingBox& b) {
  j = nlohmann::json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
}
inline void from_json(const nlohmann::json& j, BoundingBox& b) {
  b.x = j.at("x").get<double>();
  b.y = j.at("y").get<double>();
  b.w = j.at("w").get<double>();
  b.h = j.at("h").get<double>();
}

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Centroid comparison with a strict margin:
///   left_of  <=> cx(a) + margin < cx(b)     right_of <=> cx(a) > cx(b) + margin
///   above    <=> cy(a) + margin < cy(b)     below    <=> cy(a) > cy(b) + margin
inline bool eval_predicate(const BoundingBox& a, const BoundingBox& b, Predicate p,
                           double margin) {
  switch (p) {
    case Predicate::left_of: return a.cx() + margin < b.cx();
    case Predicate::right_of: return a.cx() > b.cx() + margin;
    case Predicate::above: return a.cy() + margin < b.cy();
    case Predicate::below: return a.cy() > b.cy() + margin;
  }
  return false;
}

}  // namespace intentloop
