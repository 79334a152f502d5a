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
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "intentloop/error.hpp"
#include "intentloop/evaluate.hpp"
#include "intentloop/feedback.hpp"
#include "intentloop/generator.hpp"
#include "intentloop/layout.hpp"
#include "intentloop/prompt.hpp"
#include "intentloop/rng.hpp"
#include "intentloop/update.hpp"
#include "intentloop/vocab.hpp"

namespace intentloop {

enum class RuleCondition { any, surplus, deficit };
enum class RuleAction { apply_suggestion, ignore };

NLOHMANN_JSON_SERIALIZE_ENUM(RuleCondition, {
    {RuleCondition::any, "any"},
    {RuleCondition::surplus, "surplus"},
    {RuleCondition::deficit, "deficit"},
})
NLOHMANN_JSON_SERIALIZE_ENUM(RuleAction, {{RuleAction::apply_suggestion, "apply_suggestion"}, {RuleAction::ignore, "ignore"}})

struct PolicyRule {
  FeedbackKind kind = FeedbackKind::numeracy;
  RuleCondition condition = RuleCondition::any;
  RuleAction action = RuleAction::apply_suggestion;
  friend bool operator==(const PolicyRule&, const PolicyRule&) = default;
};

inline void to_json(nlohmann::json& j, const PolicyRule& r) {
  j = nlohmann::json{{"kind", r.kind}, {"condition", r.condition}, {"action", r.action}};
}
inline void from_json(const nlohmann::json& j, PolicyRule& r) {
  r.kind = j.at("kind").get<FeedbackKind>();
  r.condition = j.value("condition", RuleCondition::any);
  r.action = j.value("action", RuleAction::apply_suggestion);
}

struct UpdatePolicy {
  std::vector<PolicyRule> rules;
  std::size_t max_signals_per_iteration = 16;

  /// numeracy surplus: pin the expected instances and reroll; numeracy
  /// deficit: add-instance constraint and reroll; attribute: pin the
  /// attribute; spatial: pin both endpoints; fidelity: prompt edit.
  static UpdatePolicy standard() {
    return {{{FeedbackKind::numeracy, RuleCondition::surplus},
             {FeedbackKind::numeracy, RuleCondition::deficit},
             {FeedbackKind::attribute},
             {FeedbackKind::spatial},
             {FeedbackKind::fidelity}},
            16};
  }

  void validate() const {
    for (auto k : {FeedbackKind::numeracy, FeedbackKind::attribute, FeedbackKind::spatial, FeedbackKind::fidelity})
      if (std::none_of(rules.begin(), rules.end(), [k](const PolicyRule& r) { return r.kind == k; }))
        throw Error(ErrorCode::InvalidConfig, std::string("policy has no rule for ") + to_string(k));
    if (max_signals_per_iteration < 1) throw Error(ErrorCode::InvalidConfig, "max_signals_per_iteration must be >= 1");
  }

  friend bool operator==(const UpdatePolicy&, const UpdatePolicy&) = default;
};

inline void to_json(nlohmann::json& j, const UpdatePolicy& p) {
  j = nlohmann::json{{"rules", p.rules}, {"max_signals_per_iteration", p.max_signals_per_iteration}};
}

namespace detail {

inline bool condition_holds(const PolicyRule& rule, const FeedbackItem& item) {
  if (rule.kind != item.kind) return false;
  if (rule.condition == RuleCondition::any) return true;
  const int expected = std::atoi(item.expected.c_str()), observed = std::atoi(item.observed.c_str());
  return rule.condition == RuleCondition::surplus ? observed > expected : observed < expected;
}

inline void push_unique(std::vector<UpdateSignal>& out, const UpdateSignal& s) {
  if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
}

}  // namespace detail

/// First matching rule per error item, in report order. Signals are
/// de-duplicated, at most one Reroll is kept (last), and the list is capped
/// at the policy's limit.
inline std::vector<UpdateSignal> signals_for_items(const std::vector<const FeedbackItem*>& items,
                                                   const UpdatePolicy& policy, UpdateOrigin origin) {
  std::vector<UpdateSignal> out;
  bool reroll = false;
  for (const auto* item : items) {
    for (const auto& rule : policy.rules) {
      if (!detail::condition_holds(rule, *item)) continue;
      if (rule.action == RuleAction::apply_suggestion) {
        for (auto s : item->suggested_update) {
          if (std::holds_alternative<Reroll>(s.action)) {
            reroll = true;
            continue;
          }
          s.origin = origin;
          detail::push_unique(out, s);
        }
      }
      break;
    }
  }
  const std::size_t cap = policy.max_signals_per_iteration;
  if (out.size() > (reroll ? cap - 1 : cap)) out.resize(reroll ? cap - 1 : cap);
  if (reroll) out.push_back({Reroll{}, origin});
  return out;
}

inline std::vector<UpdateSignal> derive_updates(const FeedbackReport& report, const UpdatePolicy& policy) {
  std::vector<const FeedbackItem*> errors;
  for (const auto& i : report.items)
    if (i.severity == Severity::error) errors.push_back(&i);
  return signals_for_items(errors, policy, UpdateOrigin::rule);
}

struct RefinementConfig {
  int max_iterations = 3;
  ErrorModelConfig generator;
  DetectorConfig detector;
  UpdatePolicy policy = UpdatePolicy::standard();
  double feedback_margin = 0.0;
  /// Enables the fidelity checker (and up-front enrichment when set).
  std::optional<DefaultsTable> knowledge;
  bool enrich_upfront = false;
  /// Scripted faults by iteration index.
  std::map<int, std::vector<ForcedFault>> fault_schedule;

  void validate() const {
    if (max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
    generator.validate();
    detector.validate();
    policy.validate();
  }

  CheckerRegistry registry() const { return CheckerRegistry::standard(knowledge ? &*knowledge : nullptr); }
};

inline nlohmann::json config_json(const RefinementConfig& c) {
  nlohmann::json knowledge = nullptr;
  if (c.knowledge) {
    knowledge = nlohmann::json::array();
    for (const auto& r : c.knowledge->rules) knowledge.push_back({{"pattern", r.pattern}, {"additions", r.additions}});
  }
  nlohmann::json schedule = nlohmann::json::object();
  for (const auto& [k, faults] : c.fault_schedule) schedule[std::to_string(k)] = faults;
  return {{"max_iterations", c.max_iterations},
          {"generator", c.generator},
          {"detector", c.detector},
          {"policy", c.policy},
          {"feedback_margin", c.feedback_margin},
          {"knowledge", knowledge},
          {"enrich_upfront", c.enrich_upfront},
          {"fault_schedule", schedule}};
}

inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_digest(const RefinementConfig& c) { return fnv1a_hex(config_json(c).dump()); }

struct SessionState {
  std::string prompt;  // canonical text of `spec`
  SceneSpec spec;
  SceneGraph graph;
  Layout layout;
  AttributePinSet attribute_pins;
  std::vector<ContentEdit> content_edits;
  RenderedScene scene;
  GenerationTrace ledger;
  FeedbackReport report;
  int k = 0;
  int rerolls = 0;
  std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const SessionState& s) {
  nlohmann::json pins = nlohmann::json::array();
  for (const auto& [id, attr] : s.attribute_pins) pins.push_back({{"instance_id", id}, {"attribute", attr}});
  j = nlohmann::json{{"prompt", s.prompt},
                     {"spec", s.spec},
                     {"graph", s.graph},
                     {"layout", s.layout},
                     {"attribute_pins", pins},
                     {"content_edits", s.content_edits},
                     {"scene", s.scene},
                     {"ledger", s.ledger},
                     {"report", s.report},
                     {"k", s.k},
                     {"rerolls", s.rerolls},
                     {"seed", s.seed}};
}
inline void from_json(const nlohmann::json& j, SessionState& s) {
  s.prompt = j.at("prompt").get<std::string>();
  s.spec = j.at("spec").get<SceneSpec>();
  s.graph = j.at("graph").get<SceneGraph>();
  s.layout = j.at("layout").get<Layout>();
  s.attribute_pins.clear();
  for (const auto& p : j.at("attribute_pins"))
    s.attribute_pins.insert({p.at("instance_id").get<std::string>(), p.at("attribute").get<std::string>()});
  s.content_edits = j.at("content_edits").get<std::vector<ContentEdit>>();
  s.scene = j.at("scene").get<RenderedScene>();
  s.ledger = j.at("ledger").get<GenerationTrace>();
  s.report = j.at("report").get<FeedbackReport>();
  s.k = j.at("k").get<int>();
  s.rerolls = j.at("rerolls").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

struct IterationRecord {
  int k = 0;
  std::string prompt;
  Layout layout;
  RenderedScene scene;
  FeedbackReport feedback;
  std::vector<UpdateSignal> updates;  // applied to produce this iteration
};

inline void to_json(nlohmann::json& j, const IterationRecord& r) {
  j = nlohmann::json{{"k", r.k},           {"prompt", r.prompt},     {"layout", r.layout},
                     {"scene", r.scene},   {"feedback", r.feedback}, {"updates", r.updates}};
}
inline void from_json(const nlohmann::json& j, IterationRecord& r) {
  r.k = j.at("k").get<int>();
  r.prompt = j.at("prompt").get<std::string>();
  r.layout = j.at("layout").get<Layout>();
  r.scene = j.at("scene").get<RenderedScene>();
  r.feedback = j.at("feedback").get<FeedbackReport>();
  r.updates = j.at("updates").get<std::vector<UpdateSignal>>();
}

enum class TraceStatus { active, satisfied, budget_exhausted };

NLOHMANN_JSON_SERIALIZE_ENUM(TraceStatus, {
    {TraceStatus::active, "active"},
    {TraceStatus::satisfied, "satisfied"},
    {TraceStatus::budget_exhausted, "budget_exhausted"},
})

struct SessionTrace {
  std::string prompt;
  std::string canonical_prompt;
  std::string config_digest;
  std::vector<IterationRecord> iterations;
  TraceStatus status = TraceStatus::active;
  Evaluation final_eval;
};

inline void to_json(nlohmann::json& j, const SessionTrace& t) {
  j = nlohmann::json{{"schema", "trace_v1"},
                     {"prompt", t.prompt},
                     {"canonical_prompt", t.canonical_prompt},
                     {"config_digest", t.config_digest},
                     {"iterations", t.iterations},
                     {"status", t.status},
                     {"final_eval", t.final_eval}};
}
inline void from_json(const nlohmann::json& j, SessionTrace& t) {
  if (j.value("schema", "") != "trace_v1") throw Error(ErrorCode::UnsupportedFormat, "not a trace_v1 document");
  t.prompt = j.at("prompt").get<std::string>();
  t.canonical_prompt = j.at("canonical_prompt").get<std::string>();
  t.config_digest = j.at("config_digest").get<std::string>();
  t.iterations = j.at("iterations").get<std::vector<IterationRecord>>();
  t.status = j.at("status").get<TraceStatus>();
  t.final_eval = j.at("final_eval").get<Evaluation>();
}

/// Raised when a run fails part-way; carries the iterations completed so far.
class RefinementError : public Error {
 public:
  RefinementError(const Error& cause, SessionTrace partial)
      : Error(cause.code(), cause.what(), cause.detail()), partial_(std::move(partial)) {}
  const SessionTrace& partial_trace() const noexcept { return partial_; }

 private:
  SessionTrace partial_;
};

inline std::uint64_t iteration_seed(std::uint64_t base, int k, int rerolls) {
  return mix_seed(mix_seed(base, static_cast<std::uint64_t>(k)), static_cast<std::uint64_t>(rerolls));
}

namespace detail {

/// Generates the scene for the state's current conditioning and attaches
/// the feedback report.
inline void regenerate(SessionState& s, const RefinementConfig& cfg, const Vocabulary& vocab) {
  const auto seed = iteration_seed(s.seed, s.k, s.rerolls);
  GeneratorInput input{s.spec, s.graph, s.layout, s.attribute_pins, seed, {}};
  if (auto it = cfg.fault_schedule.find(s.k); it != cfg.fault_schedule.end()) input.forced = it->second;
  auto [scene, ledger] = generate(input, cfg.generator, vocab);
  for (const auto& edit : s.content_edits) {
    try {
      scene = edit_content(scene, edit);
    } catch (const Error&) {
      // The edited entity did not survive regeneration.
    }
  }
  s.scene = std::move(scene);
  s.ledger = std::move(ledger);
  s.report = compose_feedback(s.spec, s.graph, s.scene, {cfg.detector, cfg.feedback_margin}, cfg.registry(), vocab,
                              seed);
}

inline void apply_one(SessionState& s, const UpdateAction& action, const Vocabulary& vocab) {
  if (const auto* edit = std::get_if<PromptEdit>(&action)) {
    SceneSpec spec = edit->prompt ? parse_prompt(*edit->prompt, vocab) : s.spec;
    merge_additions(spec, edit->additions, /*fill_only=*/false);
    validate_spec(spec, vocab);
    SceneGraph graph = expand_instances(spec);
    Layout prior;
    for (const auto& e : s.layout.entries)
      if (e.pinned && graph.find(e.instance_id)) prior.entries.push_back(e);
    s.layout = solve_layout(graph, mix_seed(s.seed, static_cast<std::uint64_t>(s.k + 1)), vocab, &prior);
    std::erase_if(s.attribute_pins, [&](const auto& pin) {
      const auto* inst = graph.find(pin.first);
      return !inst || !inst->attributes.count(pin.second);
    });
    s.spec = std::move(spec);
    s.graph = std::move(graph);
    s.prompt = spec_to_canonical_text(s.spec, vocab);
  } else if (std::holds_alternative<LayoutPin>(action) || std::holds_alternative<AddInstanceConstraint>(action)) {
    s.layout = apply_layout_update(s.layout, s.graph, action);
  } else if (const auto* pin = std::get_if<AttributePin>(&action)) {
    const auto* inst = s.graph.find(pin->instance_id);
    if (!inst) throw Error(ErrorCode::InvalidTarget, "no instance " + pin->instance_id);
    if (!vocab.is_attribute(pin->attribute)) throw Error(ErrorCode::UnknownAttribute, "unknown attribute " + pin->attribute);
    if (!inst->attributes.count(pin->attribute))
      throw Error(ErrorCode::InvalidTarget, pin->instance_id + " does not ask for " + pin->attribute);
    s.attribute_pins.insert({pin->instance_id, pin->attribute});
  } else if (const auto* content = std::get_if<ContentEdit>(&action)) {
    s.scene = edit_content(s.scene, *content);
    s.content_edits.push_back(*content);
  } else if (const auto* reroll = std::get_if<Reroll>(&action)) {
    if (reroll->bump < 1) throw Error(ErrorCode::InvalidUpdate, "reroll bump must be >= 1");
    s.rerolls += reroll->bump;
  }
}

}  // namespace detail

/// Human-origin updates first, then rule-origin, each in list order.
inline std::vector<UpdateSignal> order_updates(std::vector<UpdateSignal> updates) {
  std::stable_partition(updates.begin(), updates.end(),
                        [](const UpdateSignal& u) { return u.origin == UpdateOrigin::human; });
  return updates;
}

/// Applies the (already ordered) updates in sequence. Failures name the
/// offending index.
inline SessionState apply_updates(const SessionState& state, const std::vector<UpdateSignal>& updates,
                                  const Vocabulary& vocab) {
  SessionState s = state;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    try {
      detail::apply_one(s, updates[i].action, vocab);
    } catch (const Error& e) {
      throw Error(e.code(), "update " + std::to_string(i) + " (" + type_name(updates[i].action) + "): " + e.what(),
                  nlohmann::json{{"index", i}, {"cause", e.to_json()}});
    }
  }
  return s;
}

/// Iteration 0: parse, optional enrichment, layout, generate, feedback.
inline SessionState initial_state(std::string_view prompt, const RefinementConfig& cfg, std::uint64_t seed,
                                  const Vocabulary& vocab) {
  cfg.validate();
  SessionState s;
  s.seed = seed;
  s.spec = parse_prompt(prompt, vocab);
  if (cfg.enrich_upfront && cfg.knowledge) s.spec = enrich_spec(s.spec, *cfg.knowledge);
  s.prompt = spec_to_canonical_text(s.spec, vocab);
  s.graph = expand_instances(s.spec);
  s.layout = solve_layout(s.graph, seed, vocab);
  detail::regenerate(s, cfg, vocab);
  return s;
}

/// One round: apply updates, regenerate with the seed for k + 1, compose
/// feedback. Unbounded; the caller enforces the iteration budget.
inline SessionState iterate_once(const SessionState& state, const RefinementConfig& cfg,
                                 const std::vector<UpdateSignal>& updates, const Vocabulary& vocab) {
  SessionState s = apply_updates(state, updates, vocab);
  s.k = state.k + 1;
  detail::regenerate(s, cfg, vocab);
  return s;
}

inline IterationRecord make_record(const SessionState& s, std::vector<UpdateSignal> updates) {
  return {s.k, s.prompt, s.layout, s.scene, s.report, std::move(updates)};
}

inline void finish_trace(SessionTrace& trace, const SessionState& s, bool terminal) {
  trace.canonical_prompt = s.prompt;
  trace.final_eval = evaluate_prompt(s.spec, s.scene);
  trace.status = s.report.satisfied ? TraceStatus::satisfied
                                    : (terminal ? TraceStatus::budget_exhausted : TraceStatus::active);
}

/// Runs iteration 0 and then rule-driven rounds while the report is
/// unsatisfied and fewer than K rounds have run.
inline SessionTrace run_refinement(std::string_view prompt, const RefinementConfig& cfg, std::uint64_t seed,
                                   const Vocabulary& vocab, SessionState* final_state = nullptr) {
  SessionTrace trace;
  trace.prompt = std::string(prompt);
  trace.config_digest = config_digest(cfg);
  try {
    SessionState s = initial_state(prompt, cfg, seed, vocab);
    trace.iterations.push_back(make_record(s, {}));
    while (!s.report.satisfied && s.k < cfg.max_iterations) {
      auto updates = order_updates(derive_updates(s.report, cfg.policy));
      s = iterate_once(s, cfg, updates, vocab);
      trace.iterations.push_back(make_record(s, std::move(updates)));
    }
    finish_trace(trace, s, true);
    if (final_state) *final_state = std::move(s);
  } catch (const Error& e) {
    throw RefinementError(e, trace);
  }
  return trace;
}

}  // namespace intentloop
