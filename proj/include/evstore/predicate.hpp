#pragma once

// Tag predicates.
//
//   expr    := or
//   or      := and { "or" and }
//   and     := unary { "and" unary }
//   unary   := "not" unary | "(" expr ")" | operand cmp operand
//   cmp     := "==" | "!=" | "<" | "<=" | ">" | ">="
//   operand := name | "quoted name" | integer | decimal | true | false
//
// Comparisons run in f32 when either side is a float attribute, else in
// double when either side is a decimal literal, else in int64 (bools as 0/1).
// Attributes missing from a tag read as zero unless evaluation is strict.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "evstore/tag.hpp"

namespace evstore {

class TagPredicate {
 public:
  struct Node;

  /// Throws SyntaxError naming the byte offset of the problem.
  static TagPredicate parse(std::string_view text);

  /// Throws UnknownAttribute when `strict` and a referenced attribute is absent.
  bool evaluate(const Tag& tag, bool strict = false) const;
  /// Prefix form, e.g. "and(ge(nTracks,3),eq(isMuon,true))".
  std::string to_string() const;
  /// Sorted, unique.
  std::vector<std::string> attribute_names() const;

 private:
  explicit TagPredicate(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
  std::shared_ptr<const Node> root_;
};

inline TagPredicate parse_predicate(std::string_view text) { return TagPredicate::parse(text); }

}  // namespace evstore
