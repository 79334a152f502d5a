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

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "toml.hpp"

#include "intentloop/error.hpp"
#include "intentloop/feedback.hpp"
#include "intentloop/generator.hpp"

namespace intentloop {

/// Named generator and detector configurations.
///
/// TOML layout:
///   [preset.<name>]               ErrorModelConfig fields
///   [preset.<name>.cond_factors]  numeracy, spatial, attribute, pinned_attribute
///   [preset.<name>.bias_prior]    above, below, left_of, right_of
///   [detector.<name>]             p_miss, p_false, attr_confusion, nms_iou, seed
///   [refinement]                  max_iterations
struct Presets {
  std::map<std::string, ErrorModelConfig> generators;
  std::map<std::string, DetectorConfig> detectors;
  int max_iterations = 3;

  /// Error-free generators and perfect detectors for the three arms.
  static Presets zero() {
    Presets p;
    for (const char* name : {"unconditioned", "conditioned", "refined"}) {
      p.generators[name] = ErrorModelConfig::zero();
      p.detectors[name] = DetectorConfig::perfect();
    }
    return p;
  }

  const ErrorModelConfig& generator(const std::string& name) const {
    auto it = generators.find(name);
    if (it == generators.end()) throw Error(ErrorCode::NotFound, "no preset named " + name);
    return it->second;
  }

  /// Missing detector sections mean a perfect detector.
  DetectorConfig detector(const std::string& name) const {
    auto it = detectors.find(name);
    return it == detectors.end() ? DetectorConfig::perfect() : it->second;
  }

  static Presets parse(std::string_view text, std::string_view source = "presets") {
    toml::table root;
    try {
      root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("cannot parse ") + std::string(source) + ": " +
                                                std::string(e.description()));
    }
    Presets out;
    auto number = [&](const toml::table& t, const char* key, double fallback) {
      const auto* node = t.get(key);
      if (!node) return fallback;
      if (auto v = node->value<double>()) return *v;
      throw Error(ErrorCode::InvalidConfig, std::string("key ") + key + " must be a number");
    };
    if (const auto* presets = root["preset"].as_table()) {
      for (const auto& [name, node] : *presets) {
        const auto* t = node.as_table();
        if (!t) throw Error(ErrorCode::InvalidConfig, "preset." + std::string(name.str()) + " must be a table");
        ErrorModelConfig c;
        c.p_omit = number(*t, "p_omit", 0.0);
        c.p_dup = number(*t, "p_dup", 0.0);
        c.p_attr_swap = number(*t, "p_attr_swap", 0.0);
        c.p_attr_drop = number(*t, "p_attr_drop", 0.0);
        c.p_rel_ignore = number(*t, "p_rel_ignore", 0.0);
        c.jitter_sigma = number(*t, "jitter_sigma", 0.0);
        if (const auto* cf = (*t)["cond_factors"].as_table()) {
          c.cond_factors.numeracy = number(*cf, "numeracy", 1.0);
          c.cond_factors.spatial = number(*cf, "spatial", 1.0);
          c.cond_factors.attribute = number(*cf, "attribute", 1.0);
          c.cond_factors.pinned_attribute = number(*cf, "pinned_attribute", 1.0);
        }
        if (const auto* bp = (*t)["bias_prior"].as_table()) {
          c.bias_prior.above = number(*bp, "above", c.bias_prior.above);
          c.bias_prior.below = number(*bp, "below", c.bias_prior.below);
          c.bias_prior.left_of = number(*bp, "left_of", c.bias_prior.left_of);
          c.bias_prior.right_of = number(*bp, "right_of", c.bias_prior.right_of);
        }
        c.validate();
        out.generators[std::string(name.str())] = c;
      }
    }
    if (const auto* detectors = root["detector"].as_table()) {
      for (const auto& [name, node] : *detectors) {
        const auto* t = node.as_table();
        if (!t) throw Error(ErrorCode::InvalidConfig, "detector." + std::string(name.str()) + " must be a table");
        DetectorConfig d;
        d.p_miss = number(*t, "p_miss", 0.0);
        d.p_false = number(*t, "p_false", 0.0);
        d.attr_confusion = number(*t, "attr_confusion", 0.0);
        d.nms_iou = number(*t, "nms_iou", 1.0);
        d.seed = static_cast<std::uint64_t>((*t)["seed"].value_or<std::int64_t>(0));
        d.validate();
        out.detectors[std::string(name.str())] = d;
      }
    }
    if (const auto* r = root["refinement"].as_table())
      out.max_iterations = static_cast<int>((*r)["max_iterations"].value_or<std::int64_t>(3));
    if (out.max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "refinement.max_iterations must be >= 1");
    return out;
  }

  static Presets load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::NotFound, "cannot open presets file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  /// Stable text form; values printed with enough digits to round-trip.
  std::string to_toml() const {
    std::ostringstream out;
    auto num = [](double v) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      std::string s = buf;
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    };
    out << "[refinement]\nmax_iterations = " << max_iterations << "\n";
    for (const auto& [name, c] : generators) {
      out << "\n[preset." << name << "]\n"
          << "p_omit = " << num(c.p_omit) << "\n"
          << "p_dup = " << num(c.p_dup) << "\n"
          << "p_attr_swap = " << num(c.p_attr_swap) << "\n"
          << "p_attr_drop = " << num(c.p_attr_drop) << "\n"
          << "p_rel_ignore = " << num(c.p_rel_ignore) << "\n"
          << "jitter_sigma = " << num(c.jitter_sigma) << "\n"
          << "\n[preset." << name << ".cond_factors]\n"
          << "numeracy = " << num(c.cond_factors.numeracy) << "\n"
          << "spatial = " << num(c.cond_factors.spatial) << "\n"
          << "attribute = " << num(c.cond_factors.attribute) << "\n"
          << "pinned_attribute = " << num(c.cond_factors.pinned_attribute) << "\n"
          << "\n[preset." << name << ".bias_prior]\n"
          << "above = " << num(c.bias_prior.above) << "\n"
          << "below = " << num(c.bias_prior.below) << "\n"
          << "left_of = " << num(c.bias_prior.left_of) << "\n"
          << "right_of = " << num(c.bias_prior.right_of) << "\n";
    }
    for (const auto& [name, d] : detectors) {
      out << "\n[detector." << name << "]\n"
          << "p_miss = " << num(d.p_miss) << "\n"
          << "p_false = " << num(d.p_false) << "\n"
          << "attr_confusion = " << num(d.attr_confusion) << "\n"
          << "nms_iou = " << num(d.nms_iou) << "\n"
          << "seed = " << d.seed << "\n";
    }
    return out.str();
  }

  friend bool operator==(const Presets&, const Presets&) = default;
};

}  // namespace intentloop
