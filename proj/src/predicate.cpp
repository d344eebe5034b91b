#include "evstore/predicate.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <variant>

namespace evstore {

namespace {

enum class Cmp { kEq, kNe, kLt, kLe, kGt, kGe };

const char* cmp_name(Cmp c) {
  switch (c) {
    case Cmp::kEq: return "eq";
    case Cmp::kNe: return "ne";
    case Cmp::kLt: return "lt";
    case Cmp::kLe: return "le";
    case Cmp::kGt: return "gt";
    case Cmp::kGe: return "ge";
  }
  return "?";
}

struct Literal {
  enum class Kind { kBool, kInt, kDouble } kind;
  std::int64_t i = 0;
  double d = 0;
};

struct Value {
  enum class Kind { kBool, kInt, kF32, kDouble } kind;
  std::int64_t i = 0;
  float f = 0;
  double d = 0;
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9') || c == '.'; }
bool is_keyword(std::string_view s) { return s == "and" || s == "or" || s == "not" || s == "true" || s == "false"; }

std::string quote_name(const std::string& name) {
  bool plain = !name.empty() && is_ident_start(name[0]) && !is_keyword(name);
  for (char c : name) plain = plain && is_ident_char(c);
  if (plain) return name;
  std::string out = "\"";
  for (char c : name) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

}  // namespace

struct TagPredicate::Node {
  enum class Kind { kLiteral, kAttribute, kCompare, kAnd, kOr, kNot } kind;
  Literal literal{};
  std::string name;
  Cmp cmp = Cmp::kEq;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const TagPredicate::Node>;
using Node = TagPredicate::Node;

struct Token {
  enum class Kind { kEnd, kLParen, kRParen, kCmp, kAnd, kOr, kNot, kMinus, kName, kNumber, kTrue, kFalse } kind;
  std::size_t pos = 0;
  std::string text;
  Cmp cmp = Cmp::kEq;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) { advance(); }

  NodePtr parse() {
    auto n = parse_or();
    if (tok_.kind != Token::Kind::kEnd) error("unexpected '" + tok_.text + "'");
    return n;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorCode::kSyntaxError, msg + " at offset " + std::to_string(tok_.pos));
  }

  void advance() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n')) ++pos_;
    tok_ = Token{Token::Kind::kEnd, pos_, "", Cmp::kEq};
    if (pos_ >= text_.size()) {
      tok_.text = "end of input";
      return;
    }
    const char c = text_[pos_];
    auto two = [&](std::string_view s) { return text_.substr(pos_, 2) == s; };
    auto take = [&](Token::Kind k, std::size_t n) {
      tok_.kind = k;
      tok_.text = std::string(text_.substr(pos_, n));
      pos_ += n;
    };
    if (c == '(') return take(Token::Kind::kLParen, 1);
    if (c == ')') return take(Token::Kind::kRParen, 1);
    if (two("==")) return tok_.cmp = Cmp::kEq, take(Token::Kind::kCmp, 2);
    if (two("!=")) return tok_.cmp = Cmp::kNe, take(Token::Kind::kCmp, 2);
    if (two("<=")) return tok_.cmp = Cmp::kLe, take(Token::Kind::kCmp, 2);
    if (two(">=")) return tok_.cmp = Cmp::kGe, take(Token::Kind::kCmp, 2);
    if (c == '<') return tok_.cmp = Cmp::kLt, take(Token::Kind::kCmp, 1);
    if (c == '>') return tok_.cmp = Cmp::kGt, take(Token::Kind::kCmp, 1);
    if (c == '-') return take(Token::Kind::kMinus, 1);
    if (c == '"') {
      std::string name;
      std::size_t p = pos_ + 1;
      while (p < text_.size() && text_[p] != '"') {
        if (text_[p] == '\\' && p + 1 < text_.size()) ++p;
        name += text_[p++];
      }
      if (p >= text_.size()) error("unterminated quoted name");
      pos_ = p + 1;
      tok_.kind = Token::Kind::kName;
      tok_.text = std::move(name);
      return;
    }
    if ((c >= '0' && c <= '9') || c == '.') {
      std::size_t p = pos_;
      while (p < text_.size() && ((text_[p] >= '0' && text_[p] <= '9') || text_[p] == '.' || text_[p] == 'e' ||
                                  text_[p] == 'E' ||
                                  ((text_[p] == '+' || text_[p] == '-') && (text_[p - 1] == 'e' || text_[p - 1] == 'E')))) {
        ++p;
      }
      return take(Token::Kind::kNumber, p - pos_);
    }
    if (is_ident_start(c)) {
      std::size_t p = pos_;
      while (p < text_.size() && is_ident_char(text_[p])) ++p;
      const auto word = text_.substr(pos_, p - pos_);
      if (word == "and") return take(Token::Kind::kAnd, p - pos_);
      if (word == "or") return take(Token::Kind::kOr, p - pos_);
      if (word == "not") return take(Token::Kind::kNot, p - pos_);
      if (word == "true") return take(Token::Kind::kTrue, p - pos_);
      if (word == "false") return take(Token::Kind::kFalse, p - pos_);
      return take(Token::Kind::kName, p - pos_);
    }
    error("unexpected character '" + std::string(1, c) + "'");
  }

  static NodePtr binary(Node::Kind kind, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  NodePtr parse_or() {
    auto left = parse_and();
    while (tok_.kind == Token::Kind::kOr) {
      advance();
      left = binary(Node::Kind::kOr, left, parse_and());
    }
    return left;
  }

  NodePtr parse_and() {
    auto left = parse_unary();
    while (tok_.kind == Token::Kind::kAnd) {
      advance();
      left = binary(Node::Kind::kAnd, left, parse_unary());
    }
    return left;
  }

  NodePtr parse_unary() {
    if (tok_.kind == Token::Kind::kNot) {
      advance();
      return binary(Node::Kind::kNot, parse_unary(), nullptr);
    }
    if (tok_.kind == Token::Kind::kLParen) {
      advance();
      auto inner = parse_or();
      if (tok_.kind != Token::Kind::kRParen) error("expected ')'");
      advance();
      return inner;
    }
    auto lhs = parse_operand();
    if (tok_.kind != Token::Kind::kCmp) error("expected a comparison, got '" + tok_.text + "'");
    const auto cmp = tok_.cmp;
    advance();
    auto rhs = parse_operand();
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::kCompare;
    n->cmp = cmp;
    n->a = std::move(lhs);
    n->b = std::move(rhs);
    return n;
  }

  NodePtr parse_operand() {
    auto n = std::make_shared<Node>();
    bool negative = false;
    if (tok_.kind == Token::Kind::kMinus) {
      negative = true;
      advance();
      if (tok_.kind != Token::Kind::kNumber) error("expected a number after '-'");
    }
    switch (tok_.kind) {
      case Token::Kind::kName:
        n->kind = Node::Kind::kAttribute;
        n->name = tok_.text;
        if (n->name.empty()) error("empty attribute name");
        break;
      case Token::Kind::kTrue:
      case Token::Kind::kFalse:
        n->kind = Node::Kind::kLiteral;
        n->literal.kind = Literal::Kind::kBool;
        n->literal.i = tok_.kind == Token::Kind::kTrue ? 1 : 0;
        break;
      case Token::Kind::kNumber: {
        n->kind = Node::Kind::kLiteral;
        const std::string text = (negative ? "-" : "") + tok_.text;
        const char* b = text.data();
        const char* e = b + text.size();
        if (text.find_first_of(".eE") == std::string::npos) {
          n->literal.kind = Literal::Kind::kInt;
          auto [p, ec] = std::from_chars(b, e, n->literal.i);
          if (ec != std::errc() || p != e) error("bad integer literal '" + text + "'");
        } else {
          n->literal.kind = Literal::Kind::kDouble;
          auto [p, ec] = std::from_chars(b, e, n->literal.d);
          if (ec != std::errc() || p != e) error("bad decimal literal '" + text + "'");
        }
        break;
      }
      default:
        error("expected an attribute name or literal, got '" + tok_.text + "'");
    }
    advance();
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Token tok_;
};

Value value_of(const Node& n, const Tag& tag, bool strict) {
  Value v{Value::Kind::kInt};
  if (n.kind == Node::Kind::kLiteral) {
    switch (n.literal.kind) {
      case Literal::Kind::kBool: v.kind = Value::Kind::kBool; v.i = n.literal.i; break;
      case Literal::Kind::kInt: v.kind = Value::Kind::kInt; v.i = n.literal.i; break;
      case Literal::Kind::kDouble: v.kind = Value::Kind::kDouble; v.d = n.literal.d; break;
    }
    return v;
  }
  if (!tag.has(n.name)) {
    if (strict) fail(ErrorCode::kUnknownAttribute, "tag has no attribute '" + n.name + "'");
    return v;
  }
  const auto tv = tag.get(n.name);
  if (const auto* b = std::get_if<bool>(&tv)) {
    v.kind = Value::Kind::kBool;
    v.i = *b ? 1 : 0;
  } else if (const auto* i = std::get_if<std::int32_t>(&tv)) {
    v.i = *i;
  } else {
    v.kind = Value::Kind::kF32;
    v.f = std::get<float>(tv);
  }
  return v;
}

float as_f32(const Value& v) {
  if (v.kind == Value::Kind::kF32) return v.f;
  if (v.kind == Value::Kind::kDouble) return static_cast<float>(v.d);
  return static_cast<float>(v.i);
}

double as_double(const Value& v) {
  if (v.kind == Value::Kind::kF32) return v.f;
  if (v.kind == Value::Kind::kDouble) return v.d;
  return static_cast<double>(v.i);
}

template <typename T>
bool compare(Cmp c, T a, T b) {
  switch (c) {
    case Cmp::kEq: return a == b;
    case Cmp::kNe: return a != b;
    case Cmp::kLt: return a < b;
    case Cmp::kLe: return a <= b;
    case Cmp::kGt: return a > b;
    case Cmp::kGe: return a >= b;
  }
  return false;
}

bool eval(const Node& n, const Tag& tag, bool strict) {
  switch (n.kind) {
    case Node::Kind::kAnd: return eval(*n.a, tag, strict) && eval(*n.b, tag, strict);
    case Node::Kind::kOr: return eval(*n.a, tag, strict) || eval(*n.b, tag, strict);
    case Node::Kind::kNot: return !eval(*n.a, tag, strict);
    case Node::Kind::kCompare: {
      const auto a = value_of(*n.a, tag, strict);
      const auto b = value_of(*n.b, tag, strict);
      if (a.kind == Value::Kind::kF32 || b.kind == Value::Kind::kF32) return compare(n.cmp, as_f32(a), as_f32(b));
      if (a.kind == Value::Kind::kDouble || b.kind == Value::Kind::kDouble) {
        return compare(n.cmp, as_double(a), as_double(b));
      }
      return compare(n.cmp, a.i, b.i);
    }
    default:
      return false;
  }
}

void render(const Node& n, std::string& out) {
  switch (n.kind) {
    case Node::Kind::kLiteral:
      if (n.literal.kind == Literal::Kind::kBool) {
        out += n.literal.i ? "true" : "false";
      } else if (n.literal.kind == Literal::Kind::kInt) {
        out += std::to_string(n.literal.i);
      } else {
        char buf[64];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, n.literal.d);
        (void)ec;
        std::string s(buf, p);
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        out += s;
      }
      return;
    case Node::Kind::kAttribute: out += quote_name(n.name); return;
    case Node::Kind::kNot:
      out += "not(";
      render(*n.a, out);
      out += ')';
      return;
    case Node::Kind::kAnd:
    case Node::Kind::kOr:
    case Node::Kind::kCompare:
      out += n.kind == Node::Kind::kAnd ? "and" : n.kind == Node::Kind::kOr ? "or" : cmp_name(n.cmp);
      out += '(';
      render(*n.a, out);
      out += ',';
      render(*n.b, out);
      out += ')';
      return;
  }
}

void collect(const Node& n, std::set<std::string>& names) {
  if (n.kind == Node::Kind::kAttribute) names.insert(n.name);
  if (n.a) collect(*n.a, names);
  if (n.b) collect(*n.b, names);
}

}  // namespace

TagPredicate TagPredicate::parse(std::string_view text) { return TagPredicate(Parser(text).parse()); }

bool TagPredicate::evaluate(const Tag& tag, bool strict) const { return eval(*root_, tag, strict); }

std::string TagPredicate::to_string() const {
  std::string out;
  render(*root_, out);
  return out;
}

std::vector<std::string> TagPredicate::attribute_names() const {
  std::set<std::string> names;
  collect(*root_, names);
  return {names.begin(), names.end()};
}

}  // namespace evstore
