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
#include <thread>
#include <vector>

#include "intentloop/error.hpp"
#include "intentloop/evaluate.hpp"
#include "intentloop/generator.hpp"
#include "intentloop/presets.hpp"
#include "intentloop/prompt.hpp"
#include "intentloop/refine.hpp"
#include "intentloop/rng.hpp"
#include "intentloop/vocab.hpp"

namespace intentloop {

enum class TaskKind { numeracy, attribute_binding, spatial };
enum class Arm { unconditioned, conditioned, refined };

NLOHMANN_JSON_SERIALIZE_ENUM(TaskKind, {
    {TaskKind::numeracy, "numeracy"},
    {TaskKind::attribute_binding, "attribute"},
    {TaskKind::spatial, "spatial"},
})
NLOHMANN_JSON_SERIALIZE_ENUM(Arm, {
    {Arm::unconditioned, "unconditioned"},
    {Arm::conditioned, "conditioned"},
    {Arm::refined, "refined"},
})

inline constexpr std::array<TaskKind, 3> all_tasks{TaskKind::numeracy, TaskKind::attribute_binding,
                                                   TaskKind::spatial};
inline constexpr std::array<Arm, 3> all_arms{Arm::unconditioned, Arm::conditioned, Arm::refined};

inline const char* to_string(TaskKind t) {
  switch (t) {
    case TaskKind::numeracy: return "numeracy";
    case TaskKind::attribute_binding: return "attribute";
    case TaskKind::spatial: return "spatial";
  }
  return "?";
}

inline const char* to_string(Arm a) {
  switch (a) {
    case Arm::unconditioned: return "unconditioned";
    case Arm::conditioned: return "conditioned";
    case Arm::refined: return "refined";
  }
  return "?";
}

inline TaskKind task_from_string(std::string_view s) {
  for (auto t : all_tasks)
    if (s == to_string(t)) return t;
  if (s == "attribute_binding") return TaskKind::attribute_binding;
  throw Error(ErrorCode::InvalidConfig, "unknown task " + std::string(s));
}

inline Arm arm_from_string(std::string_view s) {
  for (auto a : all_arms)
    if (s == to_string(a)) return a;
  throw Error(ErrorCode::InvalidConfig, "unknown arm " + std::string(s));
}

struct CorpusEntry {
  std::string text;
  SceneSpec spec;  // what the text must parse to
};

namespace detail {

inline std::string with_article(const std::string& word) {
  return (std::string_view("aeiou").find(word.front()) != std::string_view::npos ? "an " : "a ") + word;
}

inline std::string relation_surface(Predicate p, std::uint64_t pick) {
  switch (p) {
    case Predicate::left_of: return pick % 2 ? "to the left of" : "left_of";
    case Predicate::right_of: return pick % 2 ? "to the right of" : "right_of";
    case Predicate::above: {
      static const char* forms[] = {"above", "on top of", "over"};
      return forms[pick % 3];
    }
    case Predicate::below: {
      static const char* forms[] = {"below", "under", "beneath"};
      return forms[pick % 3];
    }
  }
  return "";
}

inline std::uint64_t template_space(TaskKind task, const Vocabulary& vocab) {
  const std::uint64_t nc = vocab.categories().size(), na = vocab.attributes().size();
  switch (task) {
    case TaskKind::numeracy: return 4 * nc;
    case TaskKind::attribute_binding: return nc * (nc - 1) * na * (na - 1);
    case TaskKind::spatial: return nc * (nc - 1) * 4;
  }
  return 0;
}

inline CorpusEntry corpus_entry(TaskKind task, std::uint64_t index, std::uint64_t surface_pick,
                                const Vocabulary& vocab) {
  const auto& cats = vocab.categories();
  const auto& attrs = vocab.attributes();
  const std::uint64_t nc = cats.size(), na = attrs.size();
  CorpusEntry e;
  switch (task) {
    case TaskKind::numeracy: {
      const int count = static_cast<int>(index % 4) + 2;
      const auto& cat = cats[index / 4];
      e.text = std::string(number_words[static_cast<std::size_t>(count - 1)]) + " " + cat.plural;
      e.spec.groups.push_back({0, cat.name, count, {}});
      break;
    }
    case TaskKind::attribute_binding: {
      std::uint64_t r = index;
      const auto ia = r % nc;
      r /= nc;
      auto ib = r % (nc - 1);
      r /= nc - 1;
      if (ib >= ia) ++ib;
      const auto ca = r % na;
      r /= na;
      auto cb = r % (na - 1);
      if (cb >= ca) ++cb;
      e.text = with_article(attrs[ca] + " " + cats[ia].name) + " and " + with_article(attrs[cb] + " " + cats[ib].name);
      e.spec.groups.push_back({0, cats[ia].name, 1, {attrs[ca]}});
      e.spec.groups.push_back({1, cats[ib].name, 1, {attrs[cb]}});
      break;
    }
    case TaskKind::spatial: {
      std::uint64_t r = index;
      const auto ia = r % nc;
      r /= nc;
      auto ib = r % (nc - 1);
      r /= nc - 1;
      if (ib >= ia) ++ib;
      const Predicate p = all_predicates[r % 4];
      e.text = with_article(cats[ia].name) + " " + relation_surface(p, surface_pick) + " " + with_article(cats[ib].name);
      e.spec.groups.push_back({0, cats[ia].name, 1, {}});
      e.spec.groups.push_back({1, cats[ib].name, 1, {}});
      e.spec.relations.push_back({0, p, 1});
      break;
    }
  }
  return e;
}

}  // namespace detail

/// Seeded template sampling without repetition until the template space
/// is exhausted.
///   numeracy   "<count> <category>s", counts 2..5
///   attribute  "a <color> <catA> and a <color> <catB>", distinct categories and colors
///   spatial    "a <catA> <relation> a <catB>", distinct categories, surface synonyms
inline std::vector<CorpusEntry> generate_corpus(TaskKind task, std::size_t n, std::uint64_t seed,
                                                const Vocabulary& vocab) {
  Rng rng(mix_seed(mix_seed(seed, Stream::corpus), static_cast<std::uint64_t>(task)));
  const std::uint64_t space = detail::template_space(task, vocab);
  std::vector<CorpusEntry> out;
  std::set<std::uint64_t> seen;
  while (out.size() < n) {
    if (seen.size() == space) seen.clear();
    std::uint64_t index = rng.index(space);
    while (!seen.insert(index).second) index = rng.index(space);
    out.push_back(detail::corpus_entry(task, index, rng.next(), vocab));
  }
  return out;
}

struct BenchConfig {
  std::vector<TaskKind> tasks{all_tasks.begin(), all_tasks.end()};
  std::size_t n_prompts = 100;
  std::uint64_t seed = 42;
  std::vector<Arm> arms{all_arms.begin(), all_arms.end()};
  Presets presets = Presets::zero();
  unsigned jobs = 1;

  void validate() const {
    if (n_prompts < 1) throw Error(ErrorCode::InvalidConfig, "n_prompts must be >= 1");
    if (arms.empty()) throw Error(ErrorCode::InvalidConfig, "at least one arm is required");
    if (tasks.empty()) throw Error(ErrorCode::InvalidConfig, "at least one task is required");
    for (auto a : arms) presets.generator(to_string(a));
  }

  RefinementConfig refinement(Arm arm) const {
    RefinementConfig r;
    r.max_iterations = presets.max_iterations;
    r.generator = presets.generator(to_string(arm));
    r.detector = presets.detector(to_string(arm));
    return r;
  }

  nlohmann::json to_json() const {
    nlohmann::json arm_cfg = nlohmann::json::object();
    for (auto a : arms) arm_cfg[to_string(a)] = config_json(refinement(a));
    return {{"tasks", tasks}, {"n_prompts", n_prompts}, {"seed", seed}, {"arms", arms}, {"arm_configs", arm_cfg}};
  }
};

struct ArmTaskResult {
  Arm arm = Arm::unconditioned;
  TaskKind task = TaskKind::numeracy;
  std::vector<bool> passes;
  std::map<int, int> iteration_histogram;  // refined arm: records per trace -> prompts

  std::size_t pass_count() const { return static_cast<std::size_t>(std::count(passes.begin(), passes.end(), true)); }
  double accuracy() const { return passes.empty() ? 0.0 : static_cast<double>(pass_count()) / passes.size(); }
  friend bool operator==(const ArmTaskResult&, const ArmTaskResult&) = default;
};

struct BenchResult {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::size_t n_prompts = 0;
  std::map<TaskKind, std::vector<std::string>> prompts;
  std::vector<ArmTaskResult> results;

  const ArmTaskResult* find(Arm arm, TaskKind task) const {
    for (const auto& r : results)
      if (r.arm == arm && r.task == task) return &r;
    return nullptr;
  }

  double accuracy(Arm arm, TaskKind task) const {
    const auto* r = find(arm, task);
    if (!r) throw Error(ErrorCode::NotFound, std::string("no result for ") + to_string(arm) + "/" + to_string(task));
    return r->accuracy();
  }

  /// Unweighted mean over the tasks present for `arm`.
  double average(Arm arm) const {
    double sum = 0;
    int n = 0;
    for (const auto& r : results)
      if (r.arm == arm) sum += r.accuracy(), ++n;
    return n ? sum / n : 0.0;
  }

  friend bool operator==(const BenchResult&, const BenchResult&) = default;
};

inline void to_json(nlohmann::json& j, const ArmTaskResult& r) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, v] : r.iteration_histogram) hist[std::to_string(k)] = v;
  j = nlohmann::json{{"arm", r.arm},
                     {"task", r.task},
                     {"accuracy", r.accuracy()},
                     {"passes", r.pass_count()},
                     {"per_prompt", r.passes},
                     {"iteration_histogram", hist}};
}
inline void from_json(const nlohmann::json& j, ArmTaskResult& r) {
  r.arm = j.at("arm").get<Arm>();
  r.task = j.at("task").get<TaskKind>();
  r.passes = j.at("per_prompt").get<std::vector<bool>>();
  r.iteration_histogram.clear();
  for (const auto& [k, v] : j.at("iteration_histogram").items()) r.iteration_histogram[std::stoi(k)] = v.get<int>();
}
inline void to_json(nlohmann::json& j, const BenchResult& r) {
  nlohmann::json prompts = nlohmann::json::object();
  for (const auto& [task, list] : r.prompts) prompts[to_string(task)] = list;
  j = nlohmann::json{{"schema", "bench_v1"},      {"config_digest", r.config_digest}, {"seed", r.seed},
                     {"n_prompts", r.n_prompts},   {"prompts", prompts},               {"results", r.results}};
}
inline void from_json(const nlohmann::json& j, BenchResult& r) {
  if (j.value("schema", "") != "bench_v1") throw Error(ErrorCode::UnsupportedFormat, "not a bench_v1 document");
  r.config_digest = j.at("config_digest").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_prompts = j.at("n_prompts").get<std::size_t>();
  r.prompts.clear();
  for (const auto& [k, v] : j.at("prompts").items()) r.prompts[task_from_string(k)] = v.get<std::vector<std::string>>();
  r.results = j.at("results").get<std::vector<ArmTaskResult>>();
}

inline std::uint64_t prompt_seed(std::uint64_t seed, TaskKind task, std::size_t index) {
  return mix_seed(mix_seed(seed, static_cast<std::uint64_t>(task)), static_cast<std::uint64_t>(index));
}

struct PromptOutcome {
  bool pass = false;
  int iterations = 1;
};

/// One prompt under one arm.
///   unconditioned: the generator self-places from the parsed graph.
///   conditioned:   iteration 0 of the refinement loop (layout, one generation).
///   refined:       the full loop; the final scene is evaluated.
inline PromptOutcome run_arm(Arm arm, const CorpusEntry& entry, const RefinementConfig& cfg, std::uint64_t seed,
                             const Vocabulary& vocab) {
  const SceneSpec spec = parse_prompt(entry.text, vocab);
  switch (arm) {
    case Arm::unconditioned: {
      GeneratorInput input{spec, expand_instances(spec), std::nullopt, {}, iteration_seed(seed, 0, 0), {}};
      const auto [scene, ledger] = generate(input, cfg.generator, vocab);
      return {evaluate_prompt(spec, scene).pass(), 1};
    }
    case Arm::conditioned: {
      const auto s = initial_state(entry.text, cfg, seed, vocab);
      return {evaluate_prompt(spec, s.scene).pass(), 1};
    }
    case Arm::refined: {
      SessionState s;
      const auto trace = run_refinement(entry.text, cfg, seed, vocab, &s);
      return {evaluate_prompt(spec, s.scene).pass(), static_cast<int>(trace.iterations.size())};
    }
  }
  return {};
}

inline BenchResult run_benchmark(const BenchConfig& cfg, const Vocabulary& vocab = Vocabulary::builtin()) {
  cfg.validate();
  BenchResult result;
  result.seed = cfg.seed;
  result.n_prompts = cfg.n_prompts;
  result.config_digest = fnv1a_hex(cfg.to_json().dump());
  std::map<TaskKind, std::vector<CorpusEntry>> corpora;
  for (auto task : cfg.tasks) {
    corpora[task] = generate_corpus(task, cfg.n_prompts, cfg.seed, vocab);
    for (const auto& e : corpora[task]) result.prompts[task].push_back(e.text);
  }
  for (auto arm : cfg.arms) {
    const RefinementConfig rcfg = cfg.refinement(arm);
    for (auto task : cfg.tasks) {
      const auto& corpus = corpora[task];
      std::vector<PromptOutcome> outcomes(corpus.size());
      std::vector<std::optional<Error>> errors(corpus.size());
      auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < corpus.size(); i += step) {
          try {
            outcomes[i] = run_arm(arm, corpus[i], rcfg, prompt_seed(cfg.seed, task, i), vocab);
          } catch (const Error& e) {
            errors[i] = e;
          }
        }
      };
      const unsigned jobs = std::max(1u, cfg.jobs);
      if (jobs == 1) {
        work(0, 1);
      } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(work, t, jobs);
        for (auto& th : pool) th.join();
      }
      for (std::size_t i = 0; i < corpus.size(); ++i)
        if (errors[i])
          throw Error(errors[i]->code(),
                      std::string(to_string(arm)) + "/" + to_string(task) + " prompt " + std::to_string(i) + " (\"" +
                          corpus[i].text + "\"): " + errors[i]->what(),
                      nlohmann::json{{"prompt_index", i}, {"cause", errors[i]->to_json()}});
      ArmTaskResult r{arm, task, {}, {}};
      for (const auto& o : outcomes) {
        r.passes.push_back(o.pass);
        if (arm == Arm::refined) ++r.iteration_histogram[o.iterations];
      }
      result.results.push_back(std::move(r));
    }
  }
  return result;
}

enum class ReportFormat { json, csv, md };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "md") return ReportFormat::md;
  throw Error(ErrorCode::UnsupportedFormat, "unsupported report format " + std::string(s));
}

namespace detail {

inline std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", v * 100.0);
  return buf;
}

inline std::string ratio(double v, double base) {
  if (base <= 0.0) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, " (%.1fx)", v / base);
  return buf;
}

}  // namespace detail

inline std::string emit_report(const BenchResult& r, ReportFormat format) {
  std::vector<Arm> arms;
  std::vector<TaskKind> tasks;
  for (auto a : all_arms)
    for (const auto& x : r.results)
      if (x.arm == a && std::find(arms.begin(), arms.end(), a) == arms.end()) arms.push_back(a);
  for (auto t : all_tasks)
    for (const auto& x : r.results)
      if (x.task == t && std::find(tasks.begin(), tasks.end(), t) == tasks.end()) tasks.push_back(t);

  switch (format) {
    case ReportFormat::json: return nlohmann::json(r).dump(2) + "\n";
    case ReportFormat::csv: {
      std::ostringstream out;
      out << "arm,task,n_prompts,passes,accuracy\n";
      for (auto a : arms)
        for (auto t : tasks)
          if (const auto* x = r.find(a, t)) {
            char acc[32];
            std::snprintf(acc, sizeof acc, "%.4f", x->accuracy());
            out << to_string(a) << ',' << to_string(t) << ',' << x->passes.size() << ',' << x->pass_count() << ','
                << acc << '\n';
          }
      return out.str();
    }
    case ReportFormat::md: {
      static const std::map<TaskKind, const char*> headers{{TaskKind::numeracy, "Numeracy"},
                                                           {TaskKind::attribute_binding, "Attribute Binding"},
                                                           {TaskKind::spatial, "Spatial Relationships"}};
      const bool has_base = std::find(arms.begin(), arms.end(), Arm::unconditioned) != arms.end();
      std::ostringstream out;
      out << "| Arm |";
      for (auto t : tasks) out << ' ' << headers.at(t) << " |";
      out << " Average |\n|---|";
      for (std::size_t i = 0; i <= tasks.size(); ++i) out << "---|";
      out << '\n';
      for (auto a : arms) {
        out << "| " << to_string(a) << " |";
        for (auto t : tasks) {
          const auto* x = r.find(a, t);
          out << ' ' << (x ? detail::pct(x->accuracy()) : "-");
          if (x && has_base && a != Arm::unconditioned) out << detail::ratio(x->accuracy(), r.accuracy(Arm::unconditioned, t));
          out << " |";
        }
        out << ' ' << detail::pct(r.average(a));
        if (has_base && a != Arm::unconditioned) out << detail::ratio(r.average(a), r.average(Arm::unconditioned));
        out << " |\n";
      }
      return out.str();
    }
  }
  throw Error(ErrorCode::UnsupportedFormat, "unsupported report format");
}

}  // namespace intentloop
