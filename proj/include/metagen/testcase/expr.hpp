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

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "metagen/testcase/literal.hpp"

namespace metagen::testcase {

enum class BinaryOp { Add, Sub, Mul, FloorDiv, Mod };

inline const char* to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::FloorDiv: return "//";
    case BinaryOp::Mod: return "%";
  }
  return "?";
}

namespace detail {

inline BigInt floor_div(const BigInt& a, const BigInt& b) {
  BigInt q = a / b;  // truncates toward zero
  if ((a % b != 0) && ((a < 0) != (b < 0))) q -= 1;
  return q;
}

inline BigInt floor_mod(const BigInt& a, const BigInt& b) {
  BigInt r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

// Mirrors CPython's float divmod so results match the interpreter bit for bit.
inline std::pair<double, double> float_divmod(double vx, double wx) {
  double mod = std::fmod(vx, wx);
  double div = (vx - mod) / wx;
  if (mod != 0.0) {
    if ((wx < 0) != (mod < 0)) {
      mod += wx;
      div -= 1.0;
    }
  } else {
    mod = std::copysign(0.0, wx);
  }
  double floordiv;
  if (div != 0.0) {
    floordiv = std::floor(div);
    if (div - floordiv > 0.5) floordiv += 1.0;
  } else {
    floordiv = std::copysign(0.0, vx / wx);
  }
  return {floordiv, mod};
}

inline LiteralValue as_number(const LiteralValue& v) {
  if (v.kind() == LiteralValue::Kind::Boolean) return LiteralValue::integer(v.as_boolean() ? 1 : 0);
  return v;
}

inline double to_double(const LiteralValue& v) {
  if (v.kind() == LiteralValue::Kind::Float) return v.as_float();
  return v.as_integer().convert_to<double>();
}

inline LiteralValue repeat(const LiteralValue& v, const BigInt& times) {
  if (times > 100000) throw ParseError("repetition count too large");
  long count = times < 0 ? 0 : times.convert_to<long>();
  if (v.kind() == LiteralValue::Kind::Text) {
    std::string out;
    for (long i = 0; i < count; ++i) out += v.as_text();
    return LiteralValue::text(out);
  }
  const auto& seq = v.as_sequence();
  std::vector<LiteralValue> items;
  for (long i = 0; i < count; ++i) items.insert(items.end(), seq.items.begin(), seq.items.end());
  return LiteralValue::sequence(std::move(items), seq.tuple);
}

}  // namespace detail

/// Evaluate `a op b` with Python semantics over the supported literal types.
inline LiteralValue apply_binary(BinaryOp op, const LiteralValue& lhs, const LiteralValue& rhs) {
  using Kind = LiteralValue::Kind;
  LiteralValue a = detail::as_number(lhs);
  LiteralValue b = detail::as_number(rhs);
  if (a.kind() == Kind::Integer && b.kind() == Kind::Integer) {
    const auto& x = a.as_integer();
    const auto& y = b.as_integer();
    switch (op) {
      case BinaryOp::Add: return LiteralValue::integer(x + y);
      case BinaryOp::Sub: return LiteralValue::integer(x - y);
      case BinaryOp::Mul: return LiteralValue::integer(x * y);
      case BinaryOp::FloorDiv:
        if (y == 0) throw ParseError("integer division by zero");
        return LiteralValue::integer(detail::floor_div(x, y));
      case BinaryOp::Mod:
        if (y == 0) throw ParseError("integer modulo by zero");
        return LiteralValue::integer(detail::floor_mod(x, y));
    }
  }
  if (a.is_numeric() && b.is_numeric()) {
    double x = detail::to_double(a);
    double y = detail::to_double(b);
    switch (op) {
      case BinaryOp::Add: return LiteralValue::floating(x + y);
      case BinaryOp::Sub: return LiteralValue::floating(x - y);
      case BinaryOp::Mul: return LiteralValue::floating(x * y);
      case BinaryOp::FloorDiv:
        if (y == 0.0) throw ParseError("float division by zero");
        return LiteralValue::floating(detail::float_divmod(x, y).first);
      case BinaryOp::Mod:
        if (y == 0.0) throw ParseError("float modulo by zero");
        return LiteralValue::floating(detail::float_divmod(x, y).second);
    }
  }
  if (op == BinaryOp::Add) {
    if (a.kind() == Kind::Text && b.kind() == Kind::Text) return LiteralValue::text(a.as_text() + b.as_text());
    if (a.kind() == Kind::Sequence && b.kind() == Kind::Sequence &&
        a.as_sequence().tuple == b.as_sequence().tuple) {
      auto items = a.as_sequence().items;
      items.insert(items.end(), b.as_sequence().items.begin(), b.as_sequence().items.end());
      return LiteralValue::sequence(std::move(items), a.as_sequence().tuple);
    }
  }
  if (op == BinaryOp::Mul) {
    auto repeatable = [](const LiteralValue& v) {
      return v.kind() == Kind::Text || v.kind() == Kind::Sequence;
    };
    if (repeatable(a) && b.kind() == Kind::Integer) return detail::repeat(a, b.as_integer());
    if (repeatable(b) && a.kind() == Kind::Integer) return detail::repeat(b, a.as_integer());
  }
  throw ParseError(std::string("unsupported operand types for ") + to_string(op));
}

inline LiteralValue apply_negate(const LiteralValue& operand) {
  LiteralValue v = detail::as_number(operand);
  if (v.kind() == LiteralValue::Kind::Integer) return LiteralValue::integer(-v.as_integer());
  if (v.kind() == LiteralValue::Kind::Float) return LiteralValue::floating(-v.as_float());
  throw ParseError("bad operand type for unary -");
}

/// Immutable constant-expression tree. Every node carries its evaluated value,
/// computed once at construction.
class ConstExpr {
 public:
  enum class Kind { Leaf, Binary, Negate, List, Tuple, Dict };

  static ConstExpr leaf(LiteralValue v) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Leaf;
    n->value = std::move(v);
    return ConstExpr(std::move(n));
  }

  static ConstExpr binary(BinaryOp op, ConstExpr lhs, ConstExpr rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Binary;
    n->op = op;
    n->value = apply_binary(op, lhs.value(), rhs.value());
    n->children = {std::move(lhs), std::move(rhs)};
    return ConstExpr(std::move(n));
  }

  static ConstExpr negate(ConstExpr operand) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Negate;
    n->value = apply_negate(operand.value());
    n->children = {std::move(operand)};
    return ConstExpr(std::move(n));
  }

  /// List / tuple display. Dict displays take alternating key, value children.
  static ConstExpr display(Kind kind, std::vector<ConstExpr> children) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    if (kind == Kind::Dict) {
      if (children.size() % 2) throw ParseError("dict display needs key/value pairs");
      std::vector<std::pair<LiteralValue, LiteralValue>> entries;
      for (size_t i = 0; i < children.size(); i += 2) {
        auto k = children[i].value().kind();
        if (k == LiteralValue::Kind::Sequence && !children[i].value().as_sequence().tuple)
          throw ParseError("unhashable dict key");
        if (k == LiteralValue::Kind::Mapping) throw ParseError("unhashable dict key");
        // Later duplicates overwrite earlier ones, as in Python.
        auto it = std::find_if(entries.begin(), entries.end(),
                               [&](const auto& e) { return e.first == children[i].value(); });
        if (it != entries.end())
          it->second = children[i + 1].value();
        else
          entries.emplace_back(children[i].value(), children[i + 1].value());
      }
      n->value = LiteralValue::mapping(std::move(entries));
    } else if (kind == Kind::List || kind == Kind::Tuple) {
      std::vector<LiteralValue> items;
      for (const auto& c : children) items.push_back(c.value());
      n->value = LiteralValue::sequence(std::move(items), kind == Kind::Tuple);
    } else {
      throw ParseError("display() expects List, Tuple or Dict");
    }
    n->children = std::move(children);
    return ConstExpr(std::move(n));
  }

  Kind kind() const { return node_->kind; }
  BinaryOp op() const { return node_->op; }
  const LiteralValue& value() const { return node_->value; }
  const std::vector<ConstExpr>& children() const { return node_->children; }

  /// Source form of the tree with minimal parentheses.
  std::string render() const {
    switch (kind()) {
      case Kind::Leaf: return value().render();
      case Kind::Negate: {
        std::string inner = wrap(children()[0], precedence_of(Kind::Negate), false);
        if (!inner.empty() && inner.front() == '-') inner = "(" + inner + ")";
        return "-" + inner;
      }
      case Kind::Binary: {
        int p = precedence();
        return wrap(children()[0], p, false) + " " + to_string(op()) + " " + wrap(children()[1], p, true);
      }
      case Kind::List:
      case Kind::Tuple: {
        bool tuple = kind() == Kind::Tuple;
        std::string out = tuple ? "(" : "[";
        for (size_t i = 0; i < children().size(); ++i) {
          if (i) out += ", ";
          out += children()[i].render();
        }
        if (tuple && children().size() == 1) out += ",";
        return out + (tuple ? ")" : "]");
      }
      case Kind::Dict: {
        std::string out = "{";
        for (size_t i = 0; i < children().size(); i += 2) {
          if (i) out += ", ";
          out += children()[i].render() + ": " + children()[i + 1].render();
        }
        return out + "}";
      }
    }
    return {};
  }

 private:
  struct Node {
    Kind kind = Kind::Leaf;
    BinaryOp op = BinaryOp::Add;
    LiteralValue value;
    std::vector<ConstExpr> children;
  };

  explicit ConstExpr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static int precedence_of(Kind k, BinaryOp op = BinaryOp::Add) {
    switch (k) {
      case Kind::Binary: return (op == BinaryOp::Add || op == BinaryOp::Sub) ? 1 : 2;
      case Kind::Negate: return 3;
      default: return 4;
    }
  }
  int precedence() const { return precedence_of(kind(), op()); }

  // Leaf literals with a leading minus behave like unary minus for precedence.
  static int effective_precedence(const ConstExpr& e) {
    if (e.kind() == Kind::Leaf && e.value().is_numeric()) {
      std::string r = e.value().render();
      if (!r.empty() && r.front() == '-') return 3;
    }
    return e.precedence();
  }

  static std::string wrap(const ConstExpr& child, int parent_prec, bool right) {
    int cp = effective_precedence(child);
    bool parens = right ? cp <= parent_prec : cp < parent_prec;
    if (cp >= 3 && parent_prec < 3) parens = false;
    std::string r = child.render();
    return parens ? "(" + r + ")" : r;
  }

  std::shared_ptr<const Node> node_;
};

}  // namespace metagen::testcase
