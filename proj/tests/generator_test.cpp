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

#include <gtest/gtest.h>

#include "intentloop/generator.hpp"
#include "support.hpp"

namespace intentloop {
namespace {

using testing::random_spec;
using testing::vocab;

GeneratorInput input_for(const SceneSpec& spec, std::uint64_t seed, bool with_layout) {
  GeneratorInput in;
  in.spec = spec;
  in.graph = expand_instances(spec);
  in.seed = seed;
  if (with_layout) in.layout = solve_layout(in.graph, seed, vocab());
  return in;
}

GeneratorInput input_for(const std::string& prompt, std::uint64_t seed, bool with_layout) {
  return input_for(parse_prompt(prompt, vocab()), seed, with_layout);
}

ErrorModelConfig noisy() {
  ErrorModelConfig cfg;
  cfg.p_omit = 0.1;
  cfg.p_dup = 0.2;
  cfg.p_attr_swap = 0.3;
  cfg.p_attr_drop = 0.2;
  cfg.p_rel_ignore = 0.6;
  cfg.jitter_sigma = 3.0;
  cfg.cond_factors = {0.5, 0.3, 0.7, 1.0};
  return cfg;
}

SceneSpec solvable_spec(Rng& rng) {
  for (;;) {
    auto spec = random_spec(rng, 3, 4, 2);
    try {
      solve_layout(expand_instances(spec), 0, vocab());
      return spec;
    } catch (const Error&) {
    }
  }
}

std::size_t count(const GenerationTrace& t, std::initializer_list<Channel> channels) {
  std::size_t n = 0;
  for (const auto& e : t.injected)
    for (auto c : channels) n += e.channel == c;
  return n;
}

TEST(Generate, ZeroErrorIsFaithful) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto in = input_for(solvable_spec(rng), rng.next(), i % 2 == 0);
    const auto [scene, trace] = generate(in, ErrorModelConfig::zero(), vocab());
    EXPECT_TRUE(trace.injected.empty());
    EXPECT_EQ(scene, faithful_render(in, vocab()));
    ASSERT_EQ(scene.entities.size(), in.graph.instances.size());
    for (std::size_t k = 0; k < scene.entities.size(); ++k) {
      EXPECT_EQ(scene.entities[k].entity_id, in.graph.instances[k].instance_id);
      EXPECT_EQ(scene.entities[k].attributes, in.graph.instances[k].attributes);
    }
    if (in.layout)
      for (const auto& e : scene.entities) EXPECT_EQ(e.box, in.layout->find(e.entity_id)->box);
  }
}

TEST(Generate, CertainDuplicateDoublesTheDog) {
  ErrorModelConfig cfg;
  cfg.p_dup = 1.0;
  const auto [scene, trace] = generate(input_for("a dog", 3, true), cfg, vocab());
  ASSERT_EQ(scene.entities.size(), 2u);
  EXPECT_EQ(scene.entities[0].entity_id, "dog#0");
  EXPECT_EQ(scene.entities[1].entity_id, "dog#0.dup");
  EXPECT_EQ(scene.entities[1].category, "dog");
  ASSERT_EQ(trace.injected.size(), 1u);
  EXPECT_EQ(trace.injected[0].channel, Channel::duplicate);
  EXPECT_EQ(trace.injected[0].targets, std::vector<std::string>{"dog#0"});
  EXPECT_EQ(trace.injected[0].box, scene.entities[1].box);
  EXPECT_EQ(source_instance("dog#0.dup"), "dog#0");
}

TEST(Generate, CertainOmitEmptiesTheScene) {
  ErrorModelConfig cfg;
  cfg.p_omit = 1.0;
  const auto [scene, trace] = generate(input_for("two cats", 3, false), cfg, vocab());
  EXPECT_TRUE(scene.entities.empty());
  EXPECT_EQ(count(trace, {Channel::omit}), 2u);
}

TEST(Generate, LedgerReplayReproducesScene) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto in = input_for(solvable_spec(rng), rng.next(), rng.bernoulli(0.5));
    const auto [scene, trace] = generate(in, noisy(), vocab());
    EXPECT_EQ(replay_ledger(faithful_render(in, vocab()), trace), scene);
    EXPECT_NO_THROW(scene.validate());
    const auto round = nlohmann::json(trace).get<GenerationTrace>();
    EXPECT_EQ(replay_ledger(faithful_render(in, vocab()), round), scene);
  }
}

TEST(Generate, PinsWinOverEveryChannel) {
  ErrorModelConfig cfg;
  cfg.p_omit = 0.5;
  cfg.p_dup = 0.5;
  cfg.p_attr_swap = 0.5;
  cfg.p_attr_drop = 0.5;
  cfg.p_rel_ignore = 1.0;
  cfg.jitter_sigma = 5.0;
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    auto in = input_for(solvable_spec(rng), rng.next(), true);
    for (auto& e : in.layout->entries) e.pinned = true;
    for (const auto& inst : in.graph.instances)
      for (const auto& a : inst.attributes) in.attribute_pins.insert({inst.instance_id, a});
    in.forced = {{Channel::duplicate, in.graph.instances[0].instance_id, ""}};
    const auto [scene, trace] = generate(in, cfg, vocab());
    EXPECT_TRUE(trace.injected.empty());
    EXPECT_EQ(scene, faithful_render(in, vocab()));
  }
}

TEST(Generate, ForcedFaultsApply) {
  auto in = input_for("a girl and a brown dog", 5, true);
  in.forced = {{Channel::duplicate, "dog#0", ""}, {Channel::attr_drop, "dog#0", "brown"}};
  const auto [scene, trace] = generate(in, ErrorModelConfig::zero(), vocab());
  ASSERT_NE(scene.find("dog#0.dup"), nullptr);
  EXPECT_TRUE(scene.find("dog#0")->attributes.empty());
  EXPECT_EQ(scene.find("dog#0.dup")->attributes, std::set<std::string>{"brown"});
}

TEST(Generate, Deterministic) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto in = input_for(solvable_spec(rng), rng.next(), rng.bernoulli(0.5));
    const auto a = generate(in, noisy(), vocab());
    const auto b = generate(in, noisy(), vocab());
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(nlohmann::json(a.second), nlohmann::json(b.second));
  }
}

TEST(Generate, ConditioningNeverAddsErrors) {
  Rng rng(8);
  auto cfg = noisy();
  cfg.jitter_sigma = 0.0;
  std::size_t num_free = 0, num_cond = 0, attr_free = 0, attr_cond = 0, rel_free = 0, rel_cond = 0;
  for (int i = 0; i < 500; ++i) {
    const auto spec = solvable_spec(rng);
    const auto seed = rng.next();
    const auto free = generate(input_for(spec, seed, false), cfg, vocab()).second;
    const auto cond = generate(input_for(spec, seed, true), cfg, vocab()).second;
    const auto nf = count(free, {Channel::omit, Channel::duplicate});
    const auto nc = count(cond, {Channel::omit, Channel::duplicate});
    EXPECT_LE(nc, nf);
    num_free += nf;
    num_cond += nc;
    attr_free += count(free, {Channel::attr_swap, Channel::attr_drop});
    attr_cond += count(cond, {Channel::attr_swap, Channel::attr_drop});
    rel_free += count(free, {Channel::rel_ignore});
    rel_cond += count(cond, {Channel::rel_ignore});
  }
  EXPECT_LT(num_cond, num_free);
  EXPECT_LT(attr_cond, attr_free);
  EXPECT_LT(rel_cond, rel_free);
}

TEST(Generate, InvalidConfigRejected) {
  ErrorModelConfig cfg;
  cfg.p_omit = 0.7;
  cfg.p_dup = 0.5;
  try {
    generate(input_for("a dog", 1, false), cfg, vocab());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(RenderSvg, Shape) {
  RenderedScene scene;
  scene.entities = {{"dog#0", "dog", {"brown"}, {10, 20, 30, 40}}, {"cat#0", "cat", {}, {100, 100, 50, 50}}};
  const auto svg = render_svg(scene);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find(R"(width="512.00" height="512.00")"), std::string::npos);
  EXPECT_NE(svg.find(R"(<rect x="10.00" y="20.00" width="30.00" height="40.00" fill="#8c564b")"), std::string::npos);
  const auto cat = svg.find(R"(id="cat#0")"), dog = svg.find(R"(id="dog#0")");
  ASSERT_NE(cat, std::string::npos);
  ASSERT_NE(dog, std::string::npos);
  EXPECT_LT(cat, dog);
  EXPECT_EQ(svg.substr(svg.size() - 7), "</svg>\n");
  EXPECT_EQ(render_svg(scene), svg);
}

TEST(RenderSvg, EmptyScene) {
  const auto svg = render_svg(RenderedScene{});
  EXPECT_EQ(svg.find("class=\"entity\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"canvas\""), std::string::npos);
}

TEST(EditContent, Operations) {
  RenderedScene scene;
  scene.entities = {{"dog#0", "dog", {"brown"}, {10, 20, 30, 40}}, {"dog#0.dup", "dog", {"brown"}, {15, 20, 30, 40}}};
  auto removed = edit_content(scene, {ContentOp::remove, "dog#0.dup"});
  EXPECT_EQ(removed.entities.size(), 1u);
  auto recolored = edit_content(scene, {ContentOp::set_attribute, "dog#0", "", "brown", "black"});
  EXPECT_EQ(recolored.find("dog#0")->attributes, std::set<std::string>{"black"});
  ContentEdit move{ContentOp::move, "dog#0"};
  move.box = BoundingBox{200, 200, 30, 40};
  EXPECT_EQ(edit_content(scene, move).find("dog#0")->box, *move.box);
  ContentEdit add{ContentOp::add, "cat#0", "cat"};
  add.box = BoundingBox{300, 300, 40, 40};
  add.attributes = {"white"};
  EXPECT_EQ(edit_content(scene, add).entities.size(), 3u);
}

TEST(EditContent, Errors) {
  RenderedScene scene;
  scene.entities = {{"dog#0", "dog", {}, {10, 20, 30, 40}}};
  auto code_of = [&](const ContentEdit& edit) {
    try {
      edit_content(scene, edit);
    } catch (const Error& e) {
      return e.code();
    }
    ADD_FAILURE() << "no error";
    return ErrorCode::NotFound;
  };
  EXPECT_EQ(code_of({ContentOp::remove, "cat#0"}), ErrorCode::InvalidTarget);
  ContentEdit off{ContentOp::move, "dog#0"};
  off.box = BoundingBox{500, 20, 30, 40};
  EXPECT_EQ(code_of(off), ErrorCode::InvariantViolation);
  EXPECT_EQ(code_of({ContentOp::move, "dog#0"}), ErrorCode::InvalidUpdate);
  ContentEdit dup{ContentOp::add, "dog#0", "dog"};
  dup.box = BoundingBox{0, 0, 10, 10};
  EXPECT_EQ(code_of(dup), ErrorCode::InvalidTarget);
}

}  // namespace
}  // namespace intentloop
