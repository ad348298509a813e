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

#include "apres/structured.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include <fmt/format.h>

namespace apres {

StructuredValue StructuredValue::boolean(bool b) {
  StructuredValue v;
  v.data_ = b;
  return v;
}
StructuredValue StructuredValue::number(std::string text) {
  StructuredValue v;
  v.data_ = NumberText{std::move(text)};
  return v;
}
StructuredValue StructuredValue::string(std::string s) {
  StructuredValue v;
  v.data_ = std::move(s);
  return v;
}
StructuredValue StructuredValue::list(List items) {
  StructuredValue v;
  v.data_ = std::move(items);
  return v;
}
StructuredValue StructuredValue::map(Map entries) {
  StructuredValue v;
  v.data_ = std::move(entries);
  return v;
}

StructuredValue::Type StructuredValue::type() const noexcept {
  return static_cast<Type>(data_.index());
}

namespace {
[[noreturn]] void mismatch(const char* wanted) {
  throw StructuredError(StructuredErrc::TypeMismatch, fmt::format("value is not a {}", wanted));
}
}  // namespace

bool StructuredValue::as_bool() const {
  if (auto* b = std::get_if<bool>(&data_)) return *b;
  mismatch("boolean");
}
const std::string& StructuredValue::number_text() const {
  if (auto* n = std::get_if<NumberText>(&data_)) return n->text;
  mismatch("number");
}
double StructuredValue::as_number() const { return std::strtod(number_text().c_str(), nullptr); }
const std::string& StructuredValue::as_string() const {
  if (auto* s = std::get_if<std::string>(&data_)) return *s;
  mismatch("string");
}
const StructuredValue::List& StructuredValue::as_list() const {
  if (auto* l = std::get_if<List>(&data_)) return *l;
  mismatch("list");
}
const StructuredValue::Map& StructuredValue::as_map() const {
  if (auto* m = std::get_if<Map>(&data_)) return *m;
  mismatch("map");
}

const StructuredValue* StructuredValue::find(std::string_view key) const {
  for (const auto& [k, v] : as_map()) {
    if (k == key) return &v;
  }
  return nullptr;
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, std::size_t pos) : text_(text), pos_(pos) {}

  StructuredValue value(int depth = 0) {
    if (depth > 256) fail("nesting too deep");
    skip_trivia();
    if (at_end()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '{') return map(depth);
    if (c == '[') return list(depth);
    if (c == '(') {
      ++pos_;
      StructuredValue inner = value(depth + 1);
      skip_trivia();
      expect(')');
      return inner;
    }
    if (c == '"' || c == '\'') return StructuredValue::string(strings());
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return StructuredValue::number(number());
    if (std::isalpha(static_cast<unsigned char>(c))) return literal();
    fail(fmt::format("unexpected character '{}'", c));
  }

  void skip_trivia() {
    while (!at_end()) {
      const char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else if (c == '#') {
        while (!at_end() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  bool at_end() const { return pos_ >= text_.size(); }
  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw StructuredError(StructuredErrc::ParseError,
                          fmt::format("parse error at offset {} (line {}, column {}): {}", pos_, line, col, what));
  }

 private:
  void expect(char c) {
    if (at_end() || text_[pos_] != c) fail(fmt::format("expected '{}'", c));
    ++pos_;
  }

  StructuredValue map(int depth) {
    expect('{');
    StructuredValue::Map entries;
    skip_trivia();
    while (true) {
      skip_trivia();
      if (at_end()) fail("unterminated map");
      if (text_[pos_] == '}') {
        ++pos_;
        return StructuredValue::map(std::move(entries));
      }
      std::string key;
      const char c = text_[pos_];
      if (c == '"' || c == '\'') {
        key = strings();
      } else if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
        key = number();
      } else {
        fail("expected a map key");
      }
      skip_trivia();
      expect(':');
      StructuredValue v = value(depth + 1);
      entries.emplace_back(std::move(key), std::move(v));
      const std::size_t before = pos_;
      skip_trivia();
      if (at_end()) fail("unterminated map");
      if (text_[pos_] == ',') {
        ++pos_;
      } else if (text_[pos_] != '}') {
        // A missing comma is tolerated only when the next entry starts on a new line.
        if (text_.substr(before, pos_ - before).find('\n') == std::string_view::npos) {
          fail("expected ',' or '}'");
        }
      }
    }
  }

  StructuredValue list(int depth) {
    expect('[');
    StructuredValue::List items;
    while (true) {
      skip_trivia();
      if (at_end()) fail("unterminated list");
      if (text_[pos_] == ']') {
        ++pos_;
        return StructuredValue::list(std::move(items));
      }
      items.push_back(value(depth + 1));
      skip_trivia();
      if (at_end()) fail("unterminated list");
      if (text_[pos_] == ',') {
        ++pos_;
      } else if (text_[pos_] != ']') {
        fail("expected ',' or ']'");
      }
    }
  }

  // One string literal, plus any adjacent literals (implicit concatenation).
  std::string strings() {
    std::string out = string_literal();
    for (;;) {
      const std::size_t save = pos_;
      skip_trivia();
      if (!at_end() && (text_[pos_] == '"' || text_[pos_] == '\'')) {
        out += string_literal();
      } else {
        pos_ = save;
        return out;
      }
    }
  }

  std::string string_literal() {
    const char quote = text_[pos_++];
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated string");
      char c = text_[pos_++];
      if (c == quote) return out;
      if (c == '\n' || c == '\r') {
        // A raw line break inside a literal (hard-wrapped source) folds with
        // the surrounding indentation into one space.
        while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
        while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        out += ' ';
        continue;
      }
      if (c != '\\') {
        out += c;
        continue;
      }
      if (at_end()) fail("unterminated escape");
      c = text_[pos_++];
      switch (c) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case '0': out += '\0'; break;
        case 'u': append_utf8(out, unicode_escape()); break;
        case '\n': break;  // line continuation
        default: out += c; break;  // \" \' \\ \/ and unknown escapes map to the character
      }
    }
  }

  unsigned hex4() {
    if (pos_ + 4 > text_.size()) fail("truncated \\u escape");
    unsigned v = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + pos_ + 4, v, 16);
    if (ec != std::errc() || ptr != text_.data() + pos_ + 4) fail("invalid \\u escape");
    pos_ += 4;
    return v;
  }

  unsigned unicode_escape() {
    unsigned cp = hex4();
    if (cp >= 0xD800 && cp <= 0xDBFF && pos_ + 6 <= text_.size() && text_[pos_] == '\\' &&
        text_[pos_ + 1] == 'u') {
      pos_ += 2;
      const unsigned lo = hex4();
      if (lo >= 0xDC00 && lo <= 0xDFFF) return 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
      fail("unpaired surrogate");
    }
    return cp;
  }

  static void append_utf8(std::string& out, unsigned cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  std::string number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      const std::size_t d = pos_;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      return pos_ > d;
    };
    if (text_[pos_] == '-') ++pos_;
    if (!digits()) fail("malformed number");
    if (!at_end() && text_[pos_] == '.') {
      ++pos_;
      if (!digits()) fail("malformed number");
    }
    if (!at_end() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (!at_end() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (!digits()) fail("malformed exponent");
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  StructuredValue literal() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string_view word = text_.substr(start, pos_ - start);
    if (word == "true" || word == "True") return StructuredValue::boolean(true);
    if (word == "false" || word == "False") return StructuredValue::boolean(false);
    if (word == "null" || word == "None") return StructuredValue();
    pos_ = start;
    fail(fmt::format("unknown literal '{}'", word));
  }

  std::string_view text_;
  std::size_t pos_;
};

}  // namespace

StructuredValue parse_structured(std::string_view text) {
  Parser p(text, 0);
  StructuredValue v = p.value();
  p.skip_trivia();
  if (!p.at_end()) p.fail("trailing content after value");
  return v;
}

PrefixParse parse_structured_prefix(std::string_view text, std::size_t offset) {
  Parser p(text, offset);
  StructuredValue v = p.value();
  return PrefixParse{std::move(v), p.pos()};
}

std::string quote_string(std::string_view s) {
  std::string out = "\"";
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          out += fmt::format("\\u{:04x}", static_cast<unsigned>(static_cast<unsigned char>(c)));
        } else {
          out += c;
        }
    }
  }
  out += '"';
  return out;
}

}  // namespace apres
