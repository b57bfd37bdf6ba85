// Copyright 2026 The metagen Authors
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

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metagen/testcase/expr.hpp"

namespace metagen::testcase {

/// A parsed `assert CALL(args...) == EXPR` line. `expected` is empty while the
/// value is still waiting to be filled by running the oracle solution.
struct AssertionCase {
  std::string callee;
  std::vector<ConstExpr> args;
  std::optional<ConstExpr> expected;
  std::string raw;

  bool pending_oracle() const { return !expected.has_value(); }
};

namespace detail {

enum class Tok { Name, Int, Float, String, Op, End };

struct Token {
  Tok type;
  std::string text;  // identifier / operator spelling / decoded string
  size_t pos;
};

inline bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

inline std::string decode_string(std::string_view src, size_t& i) {
  char quote = src[i];
  if (src.substr(i, 3) == std::string(3, quote)) throw ParseError("triple-quoted strings are not supported");
  ++i;
  std::string out;
  while (i < src.size() && src[i] != quote) {
    char c = src[i];
    if (c == '\n') throw ParseError("unterminated string literal");
    if (c != '\\') {
      out += c;
      ++i;
      continue;
    }
    if (++i >= src.size()) throw ParseError("unterminated escape");
    char e = src[i++];
    switch (e) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case '0': out += '\0'; break;
      case '\\': out += '\\'; break;
      case '\'': out += '\''; break;
      case '"': out += '"'; break;
      case 'x': {
        if (i + 2 > src.size()) throw ParseError("truncated \\x escape");
        out += static_cast<char>(std::stoi(std::string(src.substr(i, 2)), nullptr, 16));
        i += 2;
        break;
      }
      default: throw ParseError(std::string("unsupported escape \\") + e);
    }
  }
  if (i >= src.size()) throw ParseError("unterminated string literal");
  ++i;
  return out;
}

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> toks;
  size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '#') break;
    size_t start = i;
    if (c == '\'' || c == '"') {
      toks.push_back({Tok::String, decode_string(src, i), start});
      continue;
    }
    if (is_ident_start(c)) {
      while (i < src.size() && is_ident_char(src[i])) ++i;
      if (i < src.size() && (src[i] == '\'' || src[i] == '"'))
        throw ParseError("prefixed string literals are not supported");
      toks.push_back({Tok::Name, std::string(src.substr(start, i - start)), start});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      bool is_float = false;
      std::string digits;
      auto take_digits = [&] {
        while (i < src.size() && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '_')) {
          if (src[i] != '_') digits += src[i];
          ++i;
        }
      };
      if (c == '0' && i + 1 < src.size() && std::isalpha(static_cast<unsigned char>(src[i + 1])) &&
          src[i + 1] != 'e' && src[i + 1] != 'E' && src[i + 1] != 'j')
        throw ParseError("non-decimal integer literals are not supported");
      take_digits();
      if (i < src.size() && src[i] == '.') {
        is_float = true;
        digits += src[i++];
        take_digits();
      }
      if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
        is_float = true;
        digits += src[i++];
        if (i < src.size() && (src[i] == '+' || src[i] == '-')) digits += src[i++];
        size_t before = digits.size();
        take_digits();
        if (digits.size() == before) throw ParseError("malformed float exponent");
      }
      if (i < src.size() && (src[i] == 'j' || src[i] == 'J')) throw ParseError("complex literals are not supported");
      if (i < src.size() && is_ident_char(src[i])) throw ParseError("malformed number");
      toks.push_back({is_float ? Tok::Float : Tok::Int, digits, start});
      continue;
    }
    static constexpr std::string_view kTwoChar[] = {"==", "//", "**", "!=", "<=", ">=", "->"};
    bool matched = false;
    for (auto op : kTwoChar) {
      if (src.substr(i, 2) == op) {
        toks.push_back({Tok::Op, std::string(op), start});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    static constexpr std::string_view kOneChar = "+-*%()[]{},:/<>=;.@&|^~";
    if (kOneChar.find(c) != std::string_view::npos) {
      toks.push_back({Tok::Op, std::string(1, c), start});
      ++i;
      continue;
    }
    throw ParseError(fmt::format("unexpected character '{}' at column {}", c, i));
  }
  toks.push_back({Tok::End, "", src.size()});
  return toks;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

  AssertionCase parse_assert() {
    const Token& kw = next();
    if (kw.type != Tok::Name || kw.text != "assert") throw error("expected 'assert'");
    AssertionCase out;
    const Token& name = next();
    if (name.type != Tok::Name || is_keyword_literal(name.text)) throw error("expected a function call");
    out.callee = name.text;
    if (peek().type == Tok::Op && peek().text == ".") throw error("attribute calls are not supported");
    expect("(");
    if (!accept(")")) {
      for (;;) {
        if (peek().type == Tok::Name && peek_at(1).type == Tok::Op && peek_at(1).text == "=")
          throw error("keyword arguments are not supported");
        out.args.push_back(expression());
        if (accept(")")) break;
        expect(",");
        if (accept(")")) break;
      }
    }
    expect("==");
    out.expected = expression();
    if (peek().type != Tok::End) throw error("unexpected trailing tokens");
    return out;
  }

  ConstExpr parse_standalone() {
    ConstExpr e = expression();
    if (accept(",")) {
      // Bare tuple, as produced by repr of some values.
      std::vector<ConstExpr> items{e};
      while (peek().type != Tok::End) {
        items.push_back(expression());
        if (!accept(",")) break;
      }
      e = ConstExpr::display(ConstExpr::Kind::Tuple, std::move(items));
    }
    if (peek().type != Tok::End) throw error("unexpected trailing tokens");
    return e;
  }

 private:
  static bool is_keyword_literal(const std::string& s) {
    return s == "True" || s == "False" || s == "None";
  }

  ParseError error(const std::string& what) const {
    return ParseError(fmt::format("{} at column {}", what, peek().pos));
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& peek_at(size_t off) const { return toks_[std::min(pos_ + off, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool accept(std::string_view op) {
    if (peek().type == Tok::Op && peek().text == op) {
      next();
      return true;
    }
    return false;
  }
  void expect(std::string_view op) {
    if (!accept(op)) throw error(fmt::format("expected '{}'", op));
  }

  ConstExpr expression() {
    ConstExpr lhs = term();
    for (;;) {
      if (accept("+"))
        lhs = ConstExpr::binary(BinaryOp::Add, lhs, term());
      else if (accept("-"))
        lhs = ConstExpr::binary(BinaryOp::Sub, lhs, term());
      else
        break;
    }
    reject_unsupported();
    return lhs;
  }

  ConstExpr term() {
    ConstExpr lhs = unary();
    for (;;) {
      if (accept("*"))
        lhs = ConstExpr::binary(BinaryOp::Mul, lhs, unary());
      else if (accept("//"))
        lhs = ConstExpr::binary(BinaryOp::FloorDiv, lhs, unary());
      else if (accept("%"))
        lhs = ConstExpr::binary(BinaryOp::Mod, lhs, unary());
      else
        break;
    }
    return lhs;
  }

  ConstExpr unary() {
    if (accept("-")) return ConstExpr::negate(unary());
    if (accept("+")) {
      ConstExpr e = unary();
      if (!detail::as_number(e.value()).is_numeric()) throw error("bad operand type for unary +");
      return e;
    }
    ConstExpr e = primary();
    if (peek().type == Tok::Op && peek().text == "**") throw error("'**' is not supported");
    return e;
  }

  void reject_unsupported() {
    if (peek().type != Tok::Op) {
      if (peek().type == Tok::Name && (peek().text == "for" || peek().text == "if"))
        throw error("comprehensions and conditional expressions are not supported");
      return;
    }
    const std::string& t = peek().text;
    if (t == "/") throw error("true division is not supported");
    if (t == "**" || t == "@" || t == "&" || t == "|" || t == "^" || t == "<" || t == ">" || t == "<=" ||
        t == ">=" || t == "!=" || t == "." || t == "->")
      throw error(fmt::format("operator '{}' is not supported", t));
  }

  std::vector<ConstExpr> items_until(std::string_view close, bool& saw_comma) {
    std::vector<ConstExpr> items;
    saw_comma = false;
    while (!accept(close)) {
      items.push_back(expression());
      if (peek().type == Tok::Name && peek().text == "for") throw error("comprehensions are not supported");
      if (accept(close)) break;
      expect(",");
      saw_comma = true;
    }
    return items;
  }

  ConstExpr primary() {
    const Token& t = next();
    switch (t.type) {
      case Tok::Int: return ConstExpr::leaf(LiteralValue::integer(BigInt(t.text)));
      case Tok::Float: return ConstExpr::leaf(LiteralValue::floating(std::stod(t.text)));
      case Tok::String: {
        std::string s = t.text;
        // Adjacent literals concatenate.
        while (peek().type == Tok::String) s += next().text;
        return ConstExpr::leaf(LiteralValue::text(std::move(s)));
      }
      case Tok::Name:
        if (t.text == "True") return ConstExpr::leaf(LiteralValue::boolean(true));
        if (t.text == "False") return ConstExpr::leaf(LiteralValue::boolean(false));
        if (t.text == "None") return ConstExpr::leaf(LiteralValue::null());
        if (peek().type == Tok::Op && peek().text == "(")
          throw ParseError(fmt::format("call to '{}' is not a constant expression", t.text));
        throw ParseError(fmt::format("non-literal name '{}'", t.text));
      case Tok::Op:
        if (t.text == "[") {
          bool comma = false;
          return ConstExpr::display(ConstExpr::Kind::List, items_until("]", comma));
        }
        if (t.text == "(") {
          if (accept(")")) return ConstExpr::display(ConstExpr::Kind::Tuple, {});
          bool comma = false;
          auto items = items_until(")", comma);
          if (items.size() == 1 && !comma) return items.front();
          return ConstExpr::display(ConstExpr::Kind::Tuple, std::move(items));
        }
        if (t.text == "{") return dict_display();
        break;
      default: break;
    }
    throw ParseError(fmt::format("unexpected token '{}' at column {}", t.text, t.pos));
  }

  ConstExpr dict_display() {
    std::vector<ConstExpr> kv;
    while (!accept("}")) {
      kv.push_back(expression());
      if (!accept(":")) throw error("set displays are not supported");
      kv.push_back(expression());
      if (accept("}")) break;
      expect(",");
    }
    return ConstExpr::display(ConstExpr::Kind::Dict, std::move(kv));
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

/// Parse one assert-equality line. Throws ParseError for anything outside the
/// literal/constant-arithmetic subset; such cases route to LLM-based mutation.
inline AssertionCase parse_test_case(std::string_view text) {
  std::string line = detail::trim(text);
  if (line.find('\n') != std::string::npos) throw ParseError("expected a single line");
  detail::Parser p(line);
  AssertionCase c = p.parse_assert();
  c.raw = std::string(text);
  return c;
}

/// Parse a standalone literal expression (e.g. a Python repr) and fold it.
inline LiteralValue parse_literal(std::string_view text) {
  detail::Parser p(detail::trim(text));
  return p.parse_standalone().value();
}

inline std::string render_call(const AssertionCase& c) {
  std::string out = c.callee + "(";
  for (size_t i = 0; i < c.args.size(); ++i) {
    if (i) out += ", ";
    out += c.args[i].render();
  }
  return out + ")";
}

/// Emit the case as one assert line with the expected side constant-folded.
inline std::string render_test_case(const AssertionCase& c) {
  if (c.pending_oracle()) throw RenderError("expected value is still pending the oracle");
  return "assert " + render_call(c) + " == " + c.expected->value().render();
}

/// Key over callee and evaluated arguments only.
inline std::string input_key(const AssertionCase& c) {
  std::string out = c.callee + "(";
  for (size_t i = 0; i < c.args.size(); ++i) {
    if (i) out += ",";
    out += c.args[i].value().canonical();
  }
  return out + ")";
}

/// Whitespace- and expression-form-insensitive identity of a case.
inline std::string canonical_key(const AssertionCase& c) {
  return input_key(c) + "==" + (c.pending_oracle() ? std::string("?") : c.expected->value().canonical());
}

/// Split a multi-line test blob into candidate assert lines.
inline std::vector<std::string> split_assert_lines(std::string_view blob) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= blob.size()) {
    size_t end = blob.find('\n', start);
    if (end == std::string_view::npos) end = blob.size();
    std::string line = detail::trim(blob.substr(start, end - start));
    if (line.rfind("assert", 0) == 0 && (line.size() == 6 || !detail::is_ident_char(line[6])))
      out.push_back(line);
    start = end + 1;
  }
  return out;
}

}  // namespace metagen::testcase
