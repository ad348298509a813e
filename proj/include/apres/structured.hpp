// Copyright 2026 The apres Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "apres/error.hpp"

namespace apres {

enum class StructuredErrc { ParseError, TypeMismatch };
constexpr std::string_view module_name(StructuredErrc) { return "structured"; }
using StructuredError = ModuleError<StructuredErrc>;

// Tree of maps/lists/numbers/strings parsed from model output. Accepts JSON
// and the Python literal dialect models emit for dictionaries: single quotes,
// integer keys, True/False/None, trailing commas, '#' comments. Numbers keep
// the exact text they were written with.
class StructuredValue {
 public:
  enum class Type { Null, Bool, Number, String, List, Map };

  struct NumberText {
    std::string text;
    bool operator==(const NumberText&) const = default;
  };
  using List = std::vector<StructuredValue>;
  // Keys are kept as written (integer keys keep their digits); order is source order.
  using Map = std::vector<std::pair<std::string, StructuredValue>>;

  StructuredValue() = default;
  static StructuredValue boolean(bool b);
  static StructuredValue number(std::string text);
  static StructuredValue string(std::string s);
  static StructuredValue list(List items);
  static StructuredValue map(Map entries);

  Type type() const noexcept;
  bool is_null() const noexcept { return type() == Type::Null; }
  bool is_number() const noexcept { return type() == Type::Number; }
  bool is_string() const noexcept { return type() == Type::String; }
  bool is_map() const noexcept { return type() == Type::Map; }
  bool is_list() const noexcept { return type() == Type::List; }

  bool as_bool() const;
  const std::string& number_text() const;
  double as_number() const;
  const std::string& as_string() const;
  const List& as_list() const;
  const Map& as_map() const;

  // First entry with the given key, or nullptr. Only valid on maps.
  const StructuredValue* find(std::string_view key) const;

  bool operator==(const StructuredValue&) const = default;

 private:
  std::variant<std::monostate, bool, NumberText, std::string, List, Map> data_;
};

struct PrefixParse {
  StructuredValue value;
  std::size_t end = 0;  // offset one past the parsed value
};

// Parses a whole document: one value, optionally surrounded by whitespace
// and comments.
StructuredValue parse_structured(std::string_view text);

// Parses one value starting at `offset`, stopping right after it.
PrefixParse parse_structured_prefix(std::string_view text, std::size_t offset);

// Double-quoted literal with JSON escapes; parse_structured reads it back.
std::string quote_string(std::string_view s);

}  // namespace apres
