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
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "intentloop/builtin_data.hpp"
#include "intentloop/error.hpp"

namespace intentloop {

struct CategoryInfo {
  std::string name;
  std::string plural;
  double width = 100.0;   // nominal, canvas units
  double height = 100.0;
};

/// Category and attribute vocabulary.
///
/// File format: '#' comments, blank lines ignored, sections "[categories]",
/// "[attributes]" and "[plurals]". A category line is "<token> [<w> <h>]";
/// plurals default to token + "s" and "[plurals]" lists "<singular>
/// <plural>" exceptions.
class Vocabulary {
public:
  static Vocabulary parse(std::string_view text) {
    Vocabulary vocab;
    std::map<std::string, std::string> plural_overrides;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      std::string head;
      if (!(fields >> head)) continue;
      if (head.front() == '[') {
        section = head;
        continue;
      }
      auto bad = [&](const std::string& why) {
        return Error(ErrorCode::InvalidConfig,
                     "vocabulary line " + std::to_string(line_no) + ": " + why);
      };
      if (section == "[categories]") {
        CategoryInfo info;
        info.name = head;
        if (fields >> info.width) {
          if (!(fields >> info.height)) throw bad("category size needs width and height");
          if (info.width <= 0 || info.height <= 0) throw bad("category size must be positive");
        }
        vocab.categories_.push_back(std::move(info));
      } else if (section == "[attributes]") {
        vocab.attributes_.push_back(head);
      } else if (section == "[plurals]") {
        std::string plural;
        if (!(fields >> plural)) throw bad("plural exception needs two tokens");
        plural_overrides[head] = plural;
      } else {
        throw bad("entry outside a known section");
      }
    }
    for (auto& info : vocab.categories_) {
      auto it = plural_overrides.find(info.name);
      info.plural = it != plural_overrides.end() ? it->second : info.name + "s";
    }
    vocab.index();
    return vocab;
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open vocabulary file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
  }

  /// The vocabulary shipped in data/vocab.txt.
  static const Vocabulary& builtin() {
    static const Vocabulary vocab = parse(builtin::vocabulary_text);
    return vocab;
  }

  const std::vector<CategoryInfo>& categories() const { return categories_; }
  const std::vector<std::string>& attributes() const { return attributes_; }

  /// Canonical category for a singular or plural noun.
  std::optional<std::string> category_for(std::string_view noun) const {
    auto it = nouns_.find(std::string(noun));
    if (it == nouns_.end()) return std::nullopt;
    return categories_[it->second].name;
  }

  bool has_category(std::string_view name) const {
    return std::any_of(categories_.begin(), categories_.end(),
                       [&](const CategoryInfo& c) { return c.name == name; });
  }

  bool is_attribute(std::string_view token) const {
    return std::find(attributes_.begin(), attributes_.end(), token) != attributes_.end();
  }

  const CategoryInfo& category(std::string_view name) const {
    for (const auto& c : categories_)
      if (c.name == name) return c;
    throw Error(ErrorCode::UnknownCategory, "unknown category: " + std::string(name));
  }

private:
  void index() {
    for (std::size_t i = 0; i < categories_.size(); ++i) {
      nouns_[categories_[i].name] = i;
      nouns_[categories_[i].plural] = i;
    }
  }

  std::vector<CategoryInfo> categories_;
  std::vector<std::string> attributes_;
  std::map<std::string, std::size_t> nouns_;
};

}  // namespace intentloop
