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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <fmt/format.h>

#include "metagen/core/errors.hpp"

namespace metagen::testcase {

using BigInt = boost::multiprecision::cpp_int;

/// Relative tolerance applied to float comparison and canonical keys.
inline constexpr double kFloatRelTol = 1e-9;

class LiteralValue;

struct Sequence {
  std::vector<LiteralValue> items;
  bool tuple = false;
};

// Ordered key -> value pairs, as written in the source dict display.
struct Mapping {
  std::vector<std::pair<LiteralValue, LiteralValue>> entries;
};

struct NullValue {};

/// A Python-style literal value: the concrete data that flows into and out of
/// assert-style test cases.
class LiteralValue {
 public:
  enum class Kind { Integer, Float, Text, Boolean, Null, Sequence, Mapping };

  LiteralValue() : data_(NullValue{}) {}

  static LiteralValue integer(BigInt v) { return LiteralValue(Data(std::move(v))); }
  static LiteralValue integer(std::int64_t v) { return LiteralValue(Data(BigInt(v))); }
  static LiteralValue floating(double v) { return LiteralValue(Data(v)); }
  static LiteralValue text(std::string v) { return LiteralValue(Data(std::move(v))); }
  static LiteralValue boolean(bool v) { return LiteralValue(Data(v)); }
  static LiteralValue null() { return LiteralValue(); }
  static LiteralValue sequence(std::vector<LiteralValue> items, bool tuple = false) {
    return LiteralValue(Data(Sequence{std::move(items), tuple}));
  }
  static LiteralValue mapping(std::vector<std::pair<LiteralValue, LiteralValue>> entries) {
    return LiteralValue(Data(Mapping{std::move(entries)}));
  }

  Kind kind() const { return static_cast<Kind>(data_.index()); }
  bool is_numeric() const { return kind() == Kind::Integer || kind() == Kind::Float; }

  const BigInt& as_integer() const { return std::get<BigInt>(data_); }
  double as_float() const { return std::get<double>(data_); }
  const std::string& as_text() const { return std::get<std::string>(data_); }
  bool as_boolean() const { return std::get<bool>(data_); }
  const Sequence& as_sequence() const { return std::get<Sequence>(data_); }
  const Mapping& as_mapping() const { return std::get<Mapping>(data_); }

  /// Python `repr` of the value. Throws RenderError for non-finite floats,
  /// which have no literal spelling.
  std::string render() const;

  /// Type-tagged text that is equal for two values iff they are equal under
  /// deep structural equality (floats rounded to ~10 significant digits,
  /// mappings order-insensitive).
  std::string canonical() const;

  friend bool operator==(const LiteralValue& a, const LiteralValue& b);
  friend bool operator!=(const LiteralValue& a, const LiteralValue& b) { return !(a == b); }

 private:
  // Alternative order must match Kind.
  using Data = std::variant<BigInt, double, std::string, bool, NullValue, Sequence, Mapping>;
  explicit LiteralValue(Data d) : data_(std::move(d)) {}
  Data data_;
};

namespace detail {

// Python float repr: shortest round-trip digits, fixed notation when the
// decimal exponent is in [-4, 16), scientific otherwise.
inline std::string python_float_repr(double v) {
  if (!std::isfinite(v)) throw RenderError("non-finite float has no literal form");
  if (v == 0.0) return std::signbit(v) ? "-0.0" : "0.0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
  std::string sci(buf, res.ptr);
  bool negative = sci.front() == '-';
  if (negative) sci.erase(0, 1);
  auto epos = sci.find('e');
  std::string mantissa = sci.substr(0, epos);
  int exponent = std::stoi(sci.substr(epos + 1));
  std::string digits;
  for (char c : mantissa)
    if (c != '.') digits.push_back(c);
  std::string out;
  if (exponent >= -4 && exponent < 16) {
    if (exponent < 0) {
      out = "0." + std::string(static_cast<size_t>(-exponent - 1), '0') + digits;
    } else if (static_cast<int>(digits.size()) <= exponent + 1) {
      out = digits + std::string(static_cast<size_t>(exponent + 1) - digits.size(), '0') + ".0";
    } else {
      out = digits.substr(0, static_cast<size_t>(exponent) + 1) + "." +
            digits.substr(static_cast<size_t>(exponent) + 1);
    }
  } else {
    out = digits.substr(0, 1);
    if (digits.size() > 1) out += "." + digits.substr(1);
    out += fmt::format("e{}{:02d}", exponent < 0 ? '-' : '+', std::abs(exponent));
  }
  return negative ? "-" + out : out;
}

inline std::string python_str_repr(const std::string& s) {
  bool has_single = s.find('\'') != std::string::npos;
  bool has_double = s.find('"') != std::string::npos;
  char quote = (has_single && !has_double) ? '"' : '\'';
  std::string out(1, quote);
  for (unsigned char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c == static_cast<unsigned char>(quote)) {
          out += '\\';
          out += static_cast<char>(c);
        } else if (c < 0x20 || c == 0x7f) {
          out += fmt::format("\\x{:02x}", c);
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += quote;
  return out;
}

inline bool floats_close(double a, double b) {
  if (a == b) return true;
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::fabs(a - b) <= kFloatRelTol * std::max(std::fabs(a), std::fabs(b));
}

}  // namespace detail

inline std::string LiteralValue::render() const {
  switch (kind()) {
    case Kind::Integer: return as_integer().str();
    case Kind::Float: return detail::python_float_repr(as_float());
    case Kind::Text: return detail::python_str_repr(as_text());
    case Kind::Boolean: return as_boolean() ? "True" : "False";
    case Kind::Null: return "None";
    case Kind::Sequence: {
      const auto& seq = as_sequence();
      std::string out = seq.tuple ? "(" : "[";
      for (size_t i = 0; i < seq.items.size(); ++i) {
        if (i) out += ", ";
        out += seq.items[i].render();
      }
      if (seq.tuple && seq.items.size() == 1) out += ",";
      out += seq.tuple ? ")" : "]";
      return out;
    }
    case Kind::Mapping: {
      std::string out = "{";
      const auto& entries = as_mapping().entries;
      for (size_t i = 0; i < entries.size(); ++i) {
        if (i) out += ", ";
        out += entries[i].first.render() + ": " + entries[i].second.render();
      }
      return out + "}";
    }
  }
  return {};
}

inline std::string LiteralValue::canonical() const {
  switch (kind()) {
    case Kind::Integer: return "i:" + as_integer().str();
    case Kind::Float: {
      double v = as_float();
      if (std::isnan(v)) return "f:nan";
      if (std::isinf(v)) return v > 0 ? "f:inf" : "f:-inf";
      if (v == 0.0) return "f:0";
      return fmt::format("f:{:.9e}", v);
    }
    case Kind::Text: return "s:" + detail::python_str_repr(as_text());
    case Kind::Boolean: return as_boolean() ? "b:1" : "b:0";
    case Kind::Null: return "n";
    case Kind::Sequence: {
      const auto& seq = as_sequence();
      std::string out = seq.tuple ? "t(" : "l[";
      for (size_t i = 0; i < seq.items.size(); ++i) {
        if (i) out += ",";
        out += seq.items[i].canonical();
      }
      return out + (seq.tuple ? ")" : "]");
    }
    case Kind::Mapping: {
      std::vector<std::string> parts;
      for (const auto& [k, v] : as_mapping().entries) parts.push_back(k.canonical() + ":" + v.canonical());
      std::sort(parts.begin(), parts.end());
      std::string out = "d{";
      for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ",";
        out += parts[i];
      }
      return out + "}";
    }
  }
  return {};
}

inline bool operator==(const LiteralValue& a, const LiteralValue& b) {
  using Kind = LiteralValue::Kind;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Kind::Integer: return a.as_integer() == b.as_integer();
    case Kind::Float: return detail::floats_close(a.as_float(), b.as_float());
    case Kind::Text: return a.as_text() == b.as_text();
    case Kind::Boolean: return a.as_boolean() == b.as_boolean();
    case Kind::Null: return true;
    case Kind::Sequence: {
      const auto& x = a.as_sequence();
      const auto& y = b.as_sequence();
      return x.tuple == y.tuple && x.items == y.items;
    }
    case Kind::Mapping: {
      const auto& x = a.as_mapping().entries;
      const auto& y = b.as_mapping().entries;
      if (x.size() != y.size()) return false;
      for (const auto& [k, v] : x) {
        auto it = std::find_if(y.begin(), y.end(), [&](const auto& e) { return e.first == k; });
        if (it == y.end() || !(it->second == v)) return false;
      }
      return true;
    }
  }
  return false;
}

}  // namespace metagen::testcase
