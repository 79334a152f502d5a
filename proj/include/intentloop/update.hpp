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

#include <optional>
#include <set>
#include <string>
#include <variant>

#include "intentloop/error.hpp"
#include "intentloop/geometry.hpp"
#include "intentloop/prompt.hpp"

namespace intentloop {

enum class UpdateOrigin { rule, human };

NLOHMANN_JSON_SERIALIZE_ENUM(UpdateOrigin, {{UpdateOrigin::rule, "rule"}, {UpdateOrigin::human, "human"}})

/// Refines the prompt: either a full replacement text, additions merged
/// into the current spec, or both (replacement first).
struct PromptEdit {
  std::optional<std::string> prompt;
  SpecAdditions additions;
  friend bool operator==(const PromptEdit&, const PromptEdit&) = default;
};

/// Pins an instance's layout box, optionally moving it first.
struct LayoutPin {
  std::string instance_id;
  std::optional<BoundingBox> box;
  friend bool operator==(const LayoutPin&, const LayoutPin&) = default;
};

/// Requests that every instance of a group be rendered; delta is observed
/// minus expected count at the time of the request.
struct AddInstanceConstraint {
  int group_id = 0;
  int delta = 0;
  friend bool operator==(const AddInstanceConstraint&, const AddInstanceConstraint&) = default;
};

struct AttributePin {
  std::string instance_id;
  std::string attribute;
  friend bool operator==(const AttributePin&, const AttributePin&) = default;
};

enum class ContentOp { remove, set_attribute, move, add };

NLOHMANN_JSON_SERIALIZE_ENUM(ContentOp, {
    {ContentOp::remove, "remove"},
    {ContentOp::set_attribute, "set_attribute"},
    {ContentOp::move, "move"},
    {ContentOp::add, "add"},
})

/// Direct edit of rendered content.
///   remove(entity_id) | set_attribute(entity_id, from -> to)
///   move(entity_id, box) | add(entity_id, category, attributes, box)
struct ContentEdit {
  ContentOp op = ContentOp::remove;
  std::string entity_id;
  std::string category;
  std::string from;
  std::string to;
  std::optional<BoundingBox> box;
  std::set<std::string> attributes;
  friend bool operator==(const ContentEdit&, const ContentEdit&) = default;
};

struct Reroll {
  int bump = 1;
  friend bool operator==(const Reroll&, const Reroll&) = default;
};

using UpdateAction =
    std::variant<PromptEdit, LayoutPin, AddInstanceConstraint, AttributePin, ContentEdit, Reroll>;

struct UpdateSignal {
  UpdateAction action;
  UpdateOrigin origin = UpdateOrigin::rule;
  friend bool operator==(const UpdateSignal&, const UpdateSignal&) = default;
};

inline const char* type_name(const UpdateAction& action) {
  struct Visitor {
    const char* operator()(const PromptEdit&) const { return "PromptEdit"; }
    const char* operator()(const LayoutPin&) const { return "LayoutPin"; }
    const char* operator()(const AddInstanceConstraint&) const { return "AddInstanceConstraint"; }
    const char* operator()(const AttributePin&) const { return "AttributePin"; }
    const char* operator()(const ContentEdit&) const { return "ContentEdit"; }
    const char* operator()(const Reroll&) const { return "Reroll"; }
  };
  return std::visit(Visitor{}, action);
}

inline void to_json(nlohmann::json& j, const ContentEdit& e) {
  j = nlohmann::json{{"op", e.op}, {"entity_id", e.entity_id}};
  switch (e.op) {
    case ContentOp::remove: break;
    case ContentOp::set_attribute:
      j["from"] = e.from;
      j["to"] = e.to;
      break;
    case ContentOp::move: j["box"] = e.box ? nlohmann::json(*e.box) : nlohmann::json(nullptr); break;
    case ContentOp::add:
      j["category"] = e.category;
      j["attributes"] = e.attributes;
      j["box"] = e.box ? nlohmann::json(*e.box) : nlohmann::json(nullptr);
      break;
  }
}

inline void from_json(const nlohmann::json& j, ContentEdit& e) {
  e.op = j.at("op").get<ContentOp>();
  e.entity_id = j.at("entity_id").get<std::string>();
  e.from = j.value("from", "");
  e.to = j.value("to", "");
  e.category = j.value("category", "");
  e.attributes = j.value("attributes", std::set<std::string>{});
  if (j.contains("box") && !j["box"].is_null()) e.box = j["box"].get<BoundingBox>();
}

inline void to_json(nlohmann::json& j, const UpdateSignal& u) {
  j = nlohmann::json{{"type", type_name(u.action)}, {"origin", u.origin}};
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, PromptEdit>) {
          j["prompt"] = a.prompt ? nlohmann::json(*a.prompt) : nlohmann::json(nullptr);
          j["additions"] = a.additions;
        } else if constexpr (std::is_same_v<T, LayoutPin>) {
          j["instance_id"] = a.instance_id;
          j["box"] = a.box ? nlohmann::json(*a.box) : nlohmann::json(nullptr);
        } else if constexpr (std::is_same_v<T, AddInstanceConstraint>) {
          j["group_id"] = a.group_id;
          j["delta"] = a.delta;
        } else if constexpr (std::is_same_v<T, AttributePin>) {
          j["instance_id"] = a.instance_id;
          j["attribute"] = a.attribute;
        } else if constexpr (std::is_same_v<T, ContentEdit>) {
          j["edit"] = a;
        } else {
          j["bump"] = a.bump;
        }
      },
      u.action);
}

inline void from_json(const nlohmann::json& j, UpdateSignal& u) {
  const auto type = j.at("type").get<std::string>();
  u.origin = j.value("origin", UpdateOrigin::rule);
  auto box = [&]() -> std::optional<BoundingBox> {
    if (j.contains("box") && !j["box"].is_null()) return j["box"].get<BoundingBox>();
    return std::nullopt;
  };
  if (type == "PromptEdit") {
    PromptEdit e;
    if (j.contains("prompt") && !j["prompt"].is_null()) e.prompt = j["prompt"].get<std::string>();
    if (j.contains("additions")) e.additions = j["additions"].get<SpecAdditions>();
    u.action = std::move(e);
  } else if (type == "LayoutPin") {
    u.action = LayoutPin{j.at("instance_id").get<std::string>(), box()};
  } else if (type == "AddInstanceConstraint") {
    u.action = AddInstanceConstraint{j.at("group_id").get<int>(), j.value("delta", 0)};
  } else if (type == "AttributePin") {
    u.action = AttributePin{j.at("instance_id").get<std::string>(), j.at("attribute").get<std::string>()};
  } else if (type == "ContentEdit") {
    u.action = j.at("edit").get<ContentEdit>();
  } else if (type == "Reroll") {
    u.action = Reroll{j.value("bump", 1)};
  } else {
    throw Error(ErrorCode::InvalidUpdate, "unknown update type: " + type);
  }
}

}  // namespace intentloop
