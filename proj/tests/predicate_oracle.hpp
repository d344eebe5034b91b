#pragma once

// Random predicate trees with their own renderer and evaluator, kept apart
// from the library parser so the two can be checked against each other.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "evstore/tag.hpp"

namespace evstore::test {

struct OracleLiteral {
  enum Kind { kBool, kInt, kDouble } kind = kInt;
  std::int64_t i = 0;
  double d = 0;
};

struct OracleExpr {
  enum Kind { kCmp, kAnd, kOr, kNot } kind = kCmp;
  // kCmp
  std::string attr;
  std::string op;
  OracleLiteral lit;
  bool attr_on_left = true;
  // kAnd / kOr / kNot
  std::shared_ptr<OracleExpr> a, b;
};

using OraclePtr = std::shared_ptr<OracleExpr>;

inline std::string literal_text(const OracleLiteral& l) {
  switch (l.kind) {
    case OracleLiteral::kBool: return l.i ? "true" : "false";
    case OracleLiteral::kInt: return std::to_string(l.i);
    case OracleLiteral::kDouble: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", l.d);
      std::string s = buf;
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      return s;
    }
  }
  return "";
}

inline OracleLiteral random_literal(std::mt19937_64& rng) {
  OracleLiteral l;
  switch (rng() % 6) {
    case 0: l.kind = OracleLiteral::kBool; l.i = static_cast<std::int64_t>(rng() & 1); break;
    case 1:
    case 2: l.kind = OracleLiteral::kDouble; l.d = static_cast<double>(static_cast<std::int64_t>(rng() % 4001) - 2000) / 16.0; break;
    default: l.kind = OracleLiteral::kInt; l.i = static_cast<std::int64_t>(rng() % 241) - 120; break;
  }
  return l;
}

inline OraclePtr random_predicate(std::mt19937_64& rng, const std::vector<std::string>& names, int depth) {
  static const char* kOps[] = {"==", "!=", "<", "<=", ">", ">="};
  auto e = std::make_shared<OracleExpr>();
  const auto pick = depth <= 0 ? 0 : rng() % 5;
  if (pick <= 1) {
    e->kind = OracleExpr::kCmp;
    e->attr = names[rng() % names.size()];
    e->op = kOps[rng() % 6];
    e->lit = random_literal(rng);
    e->attr_on_left = rng() % 4 != 0;
  } else if (pick == 2) {
    e->kind = OracleExpr::kAnd;
  } else if (pick == 3) {
    e->kind = OracleExpr::kOr;
  } else {
    e->kind = OracleExpr::kNot;
  }
  if (e->kind != OracleExpr::kCmp) e->a = random_predicate(rng, names, depth - 1);
  if (e->kind == OracleExpr::kAnd || e->kind == OracleExpr::kOr) e->b = random_predicate(rng, names, depth - 1);
  return e;
}

inline std::string quoted(const std::string& name) {
  bool plain = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_');
  for (char c : name) plain = plain && (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.');
  if (name == "and" || name == "or" || name == "not" || name == "true" || name == "false") plain = false;
  return plain ? name : "\"" + name + "\"";
}

/// Infix text, fully parenthesised.
inline std::string infix(const OracleExpr& e) {
  switch (e.kind) {
    case OracleExpr::kCmp:
      return e.attr_on_left ? quoted(e.attr) + " " + e.op + " " + literal_text(e.lit)
                            : literal_text(e.lit) + " " + e.op + " " + quoted(e.attr);
    case OracleExpr::kAnd: return "(" + infix(*e.a) + ") and (" + infix(*e.b) + ")";
    case OracleExpr::kOr: return "(" + infix(*e.a) + ") or (" + infix(*e.b) + ")";
    case OracleExpr::kNot: return "not (" + infix(*e.a) + ")";
  }
  return "";
}

template <typename T>
bool apply_op(const std::string& op, T a, T b) {
  if (op == "==") return a == b;
  if (op == "!=") return a != b;
  if (op == "<") return a < b;
  if (op == "<=") return a <= b;
  if (op == ">") return a > b;
  return a >= b;
}

/// Brute-force evaluation straight from the tag's value arrays.
inline bool oracle_eval(const OracleExpr& e, const Tag& tag) {
  switch (e.kind) {
    case OracleExpr::kAnd: return oracle_eval(*e.a, tag) && oracle_eval(*e.b, tag);
    case OracleExpr::kOr: return oracle_eval(*e.a, tag) || oracle_eval(*e.b, tag);
    case OracleExpr::kNot: return !oracle_eval(*e.a, tag);
    case OracleExpr::kCmp: break;
  }
  bool is_float = false;
  float fv = 0;
  std::int64_t iv = 0;
  if (const auto slot = tag.descriptor().find(e.attr)) {
    switch (slot->kind) {
      case AttributeKind::kBool: iv = tag.bools()[slot->index] ? 1 : 0; break;
      case AttributeKind::kInt: iv = tag.ints()[slot->index]; break;
      case AttributeKind::kFloat: is_float = true; fv = tag.floats()[slot->index]; break;
    }
  }
  const auto& l = e.lit;
  if (is_float) {
    const float lf = l.kind == OracleLiteral::kDouble ? static_cast<float>(l.d) : static_cast<float>(l.i);
    return e.attr_on_left ? apply_op(e.op, fv, lf) : apply_op(e.op, lf, fv);
  }
  if (l.kind == OracleLiteral::kDouble) {
    const auto a = static_cast<double>(iv);
    return e.attr_on_left ? apply_op(e.op, a, l.d) : apply_op(e.op, l.d, a);
  }
  return e.attr_on_left ? apply_op(e.op, iv, l.i) : apply_op(e.op, l.i, iv);
}

}  // namespace evstore::test
