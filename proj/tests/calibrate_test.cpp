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

#include "intentloop/calibrate.hpp"
#include "support.hpp"

namespace intentloop {
namespace {

using testing::vocab;

CalibrationOptions small_options() {
  CalibrationOptions o;
  o.n_prompts = 60;
  o.tol = 0.05;
  o.detector_tol = 0.05;
  o.jitter_sigma = 0.0;
  return o;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::NotFound;
}

TEST(Bisect, FindsTargetOnMonotoneCurve) {
  const auto f = [](double x) { return 1.0 - x; };
  EXPECT_NEAR(detail::bisect(0, 1, 0.3, 20, f), 0.7, 1e-5);
  EXPECT_EQ(detail::bisect(0, 1, 1.5, 20, f), 0.0);
  EXPECT_EQ(detail::bisect(0, 1, -0.5, 20, f), 1.0);
}

TEST(Calibrate, PerfectTargetsGiveZeroRates) {
  const auto r = calibrate_unconditioned({1.0, 1.0, 1.0}, small_options(), vocab());
  EXPECT_TRUE(r.generator.error_free());
  EXPECT_EQ(r.achieved, (TaskAccuracy{1.0, 1.0, 1.0}));
}

TEST(Calibrate, UnconditionedReachesTargets) {
  auto o = small_options();
  o.n_prompts = 200;
  const TaskAccuracy targets{0.6, 0.6, 0.5};
  const auto r = calibrate_unconditioned(targets, o, vocab());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.achieved[i], targets[i], o.tol + 1e-12);
  EXPECT_NEAR(r.generator.p_dup, 0.85 * (r.generator.p_omit + r.generator.p_dup), 1e-12);
  EXPECT_NEAR(r.generator.p_attr_drop, 0.25 * r.generator.p_attr_swap, 1e-12);
}

TEST(Calibrate, UnreachableTargetFails) {
  EXPECT_EQ(code_of([] { calibrate_detector({0.1, 0.1, 0.1}, ErrorModelConfig::zero(), small_options(), vocab()); }),
            ErrorCode::CalibrationFailed);
}

TEST(Calibrate, BudgetExhaustionFails) {
  auto o = small_options();
  o.budget = 2;
  EXPECT_EQ(code_of([&] { calibrate_unconditioned({0.5, 0.5, 0.5}, o, vocab()); }), ErrorCode::CalibrationFailed);
}

TEST(Calibrate, InvalidInputsRejected) {
  EXPECT_EQ(code_of([] { calibrate_unconditioned({1.2, 0.5, 0.5}, small_options(), vocab()); }),
            ErrorCode::InvalidConfig);
  auto o = small_options();
  o.n_prompts = 0;
  EXPECT_EQ(code_of([&] { calibrate_unconditioned({0.5, 0.5, 0.5}, o, vocab()); }), ErrorCode::InvalidConfig);
}

TEST(Calibrate, ShippedPresetsMatchTheirSearch) {
  // The shipped refined preset must keep the conditioned generator and only
  // differ in the feedback detector.
  const auto p = Presets::load(INTENTLOOP_SOURCE_DIR "/presets.toml");
  EXPECT_EQ(p.generator("refined"), p.generator("conditioned"));
  EXPECT_EQ(p.detector("conditioned"), DetectorConfig::perfect());
  EXPECT_EQ(p.detector("unconditioned"), DetectorConfig::perfect());
}

}  // namespace
}  // namespace intentloop
