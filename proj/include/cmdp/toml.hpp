#pragma once

#include <cctype>
#include <limits>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cmdp/error.hpp"

namespace cmdp::toml {

/// Parser for the TOML subset used by experiment configs: [table] and
/// [table.sub] headers, bare or quoted keys, basic and literal strings,
/// integers, floats, booleans, arrays (multi-line allowed) and inline tables.
/// Produces the equivalent JSON document.
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        require_syntax(peek() != '[', "arrays of tables are not supported");
        table = &root;
        while (true) {
          skip_inline_space();
          const std::string key = parse_key();
          auto& slot = (*table)[key];
          if (slot.is_null()) slot = nlohmann::json::object();
          require_syntax(slot.is_object(), "table '" + key + "' clashes with a value");
          table = &slot;
          skip_inline_space();
          if (peek() == '.') {
            ++pos_;
            continue;
          }
          expect(']');
          break;
        }
        end_of_line();
        continue;
      }
      parse_pair(*table);
      end_of_line();
    }
    return root;
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  [[noreturn]] void syntax(const std::string& what) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
    fail(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + what);
  }
  void require_syntax(bool ok, const std::string& what) const {
    if (!ok) syntax(what);
  }
  void expect(char c) {
    require_syntax(peek() == c, std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_inline_space();
      skip_comment();
      if (peek() == '\r' || peek() == '\n')
        ++pos_;
      else
        break;
    }
  }
  void end_of_line() {
    skip_inline_space();
    skip_comment();
    if (peek() == '\r') ++pos_;
    require_syntax(eof() || peek() == '\n', "unexpected trailing characters");
    if (!eof()) ++pos_;
  }

  std::string parse_key() {
    if (peek() == '"' || peek() == '\'') return parse_string();
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    require_syntax(pos_ > start, "expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  void parse_pair(nlohmann::json& table) {
    nlohmann::json* target = &table;
    std::string key = parse_key();
    skip_inline_space();
    while (peek() == '.') {
      ++pos_;
      skip_inline_space();
      auto& slot = (*target)[key];
      if (slot.is_null()) slot = nlohmann::json::object();
      require_syntax(slot.is_object(), "dotted key '" + key + "' clashes with a value");
      target = &slot;
      key = parse_key();
      skip_inline_space();
    }
    expect('=');
    skip_inline_space();
    require_syntax(!target->contains(key), "duplicate key '" + key + "'");
    (*target)[key] = parse_value();
  }

  std::string parse_string() {
    const char quote = peek();
    ++pos_;
    std::string out;
    while (true) {
      require_syntax(!eof() && peek() != '\n', "unterminated string");
      const char c = text_[pos_++];
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        require_syntax(!eof(), "unterminated escape");
        const char e = text_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '\\': out += '\\'; break;
          case '"': out += '"'; break;
          default: syntax(std::string("unsupported escape \\") + e);
        }
        continue;
      }
      out += c;
    }
    return out;
  }

  void skip_array_space() {
    while (!eof()) {
      skip_inline_space();
      skip_comment();
      if (peek() == '\r' || peek() == '\n')
        ++pos_;
      else
        break;
    }
  }

  nlohmann::json parse_value() {
    const char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') {
      ++pos_;
      nlohmann::json arr = nlohmann::json::array();
      while (true) {
        skip_array_space();
        if (peek() == ']') {
          ++pos_;
          return arr;
        }
        arr.push_back(parse_value());
        skip_array_space();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect(']');
        return arr;
      }
    }
    if (c == '{') {
      ++pos_;
      nlohmann::json obj = nlohmann::json::object();
      skip_inline_space();
      if (peek() == '}') {
        ++pos_;
        return obj;
      }
      while (true) {
        skip_inline_space();
        parse_pair(obj);
        skip_inline_space();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect('}');
        return obj;
      }
    }
    const std::size_t start = pos_;
    while (!eof() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
           peek() != '}' && peek() != '#')
      ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    require_syntax(!token.empty(), "expected a value");
    if (token == "true") return true;
    if (token == "false") return false;
    if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    std::string digits;
    for (char ch : token)
      if (ch != '_') digits += ch;
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const long long v = std::stoll(digits, &used, 10);
        if (used == digits.size()) return v;
      }
    } catch (const std::exception&) {
    }
    syntax("cannot parse value '" + token + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline nlohmann::json parse(std::string_view text) { return Parser(text).parse(); }

}  // namespace cmdp::toml
