#pragma once

// Event tags: small typed attribute summaries used for coarse pre-selection.
//
// A TagDescriptor is the immutable name -> (kind, position) table for a tag's
// value arrays. Descriptors are content-interned, so every tag with the same
// attribute list shares one instance. Transient-only attributes live on the
// Tag itself and are never written to disk.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "evstore/bytes.hpp"

namespace evstore {

enum class AttributeKind : std::uint8_t { kBool = 0, kInt = 1, kFloat = 2 };

char kind_code(AttributeKind kind);
std::string_view kind_name(AttributeKind kind);

using TagValue = std::variant<bool, std::int32_t, float>;

AttributeKind kind_of(const TagValue& value);
TagValue zero_value(AttributeKind kind);
std::string format_value(const TagValue& value);
/// Exact comparison; floats compare by bit pattern.
bool same_value(const TagValue& a, const TagValue& b);

struct AttributeSpec {
  std::string name;
  AttributeKind kind = AttributeKind::kInt;
  bool transient_only = false;

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

using HashFunction = std::uint64_t (*)(std::string_view);

/// "name|K;name|K" with K in {B,I,F}, transient-only specs excluded.
std::string canonical_encoding(std::span<const AttributeSpec> specs);

class TagDescriptor {
 public:
  struct Slot {
    AttributeKind kind;
    std::uint32_t index;
  };

  /// Drops transient-only specs, validates names, computes the content id.
  /// Throws DuplicateAttributeName, InvalidName, IllegalCharacter.
  static TagDescriptor build(std::vector<AttributeSpec> specs, HashFunction hash = fnv1a64);
  /// Inverse of canonical_encoding. Throws CorruptRecord on malformed text.
  static TagDescriptor from_canonical(std::string_view canonical, HashFunction hash = fnv1a64);

  std::uint64_t id() const { return id_; }
  const std::string& canonical() const { return canonical_; }
  const std::vector<AttributeSpec>& specs() const { return specs_; }
  std::size_t count(AttributeKind kind) const { return counts_[static_cast<std::size_t>(kind)]; }
  std::optional<Slot> find(std::string_view name) const;

 private:
  TagDescriptor() = default;

  std::vector<AttributeSpec> specs_;
  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::size_t counts_[3] = {0, 0, 0};
  std::string canonical_;
  std::uint64_t id_ = 0;
};

using DescriptorPtr = std::shared_ptr<const TagDescriptor>;

const DescriptorPtr& empty_descriptor();

/// Attributes of `base` followed by those of `extra` that `base` lacks.
/// Throws KindConflict when a name appears with two kinds.
std::vector<AttributeSpec> merge_attribute_lists(std::span<const AttributeSpec> base,
                                                 std::span<const AttributeSpec> extra);

/// Thread-safe content-interning table of descriptors.
class DescriptorRegistry {
 public:
  explicit DescriptorRegistry(HashFunction hash = fnv1a64) : hash_(hash) {}

  DescriptorPtr intern(std::vector<AttributeSpec> specs);
  /// Interns an already-built descriptor, returning the canonical shared instance.
  DescriptorPtr adopt(const DescriptorPtr& descriptor);

  DescriptorPtr find(std::uint64_t id) const;
  DescriptorPtr get(std::uint64_t id) const;
  bool contains(const TagDescriptor& descriptor) const;
  std::size_t size() const;
  std::vector<DescriptorPtr> all() const;
  void clear();

 private:
  HashFunction hash_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::uint64_t, DescriptorPtr> by_id_;
};

/// Interns `specs` and returns the descriptor id.
std::uint64_t descriptor_intern(DescriptorRegistry& registry, std::vector<AttributeSpec> specs);

using DescriptorLookup = std::function<DescriptorPtr(std::uint64_t)>;

class Tag {
 public:
  Tag() : Tag(empty_descriptor()) {}
  explicit Tag(DescriptorPtr descriptor, std::vector<AttributeSpec> transient_specs = {});

  /// Interns the persistent subset of `specs`; the rest become transient-only.
  static Tag create(DescriptorRegistry& registry, const std::vector<AttributeSpec>& specs);

  /// Throws UnknownAttribute, KindMismatch.
  void set(std::string_view name, const TagValue& value);
  /// Writes a persistent value by slot. Throws InvalidArgument when out of range.
  void set_slot(TagDescriptor::Slot slot, const TagValue& value);
  /// Transient values first, then the descriptor position. Throws UnknownAttribute.
  TagValue get(std::string_view name) const;
  bool has(std::string_view name) const;

  const TagDescriptor& descriptor() const { return *descriptor_; }
  const DescriptorPtr& descriptor_ptr() const { return descriptor_; }
  const std::vector<AttributeSpec>& transient_specs() const { return transient_specs_; }

  const std::vector<bool>& bools() const { return bools_; }
  const std::vector<std::int32_t>& ints() const { return ints_; }
  const std::vector<float>& floats() const { return floats_; }

  /// Persistent (name, value) pairs in descriptor order.
  std::vector<std::pair<std::string, TagValue>> persistent_values() const;

  /// Same persistent values laid out against `wider`; attributes missing from
  /// this tag take zero defaults. Throws KindConflict.
  Tag widened_to(DescriptorPtr wider) const;

  /// u64 descriptor id, LSB-first packed bools, i32 ints, f32 floats; all LE.
  std::vector<std::byte> encode() const;
  std::size_t encoded_size() const;

  static Tag decode(std::span<const std::byte> bytes, const DescriptorLookup& lookup);
  static std::uint64_t peek_descriptor_id(std::span<const std::byte> bytes);

 private:
  DescriptorPtr descriptor_;
  std::vector<bool> bools_;
  std::vector<std::int32_t> ints_;
  std::vector<float> floats_;
  std::vector<AttributeSpec> transient_specs_;
  std::unordered_map<std::string, TagValue> transient_values_;
};

/// Encoded tag bytes; the descriptor must already be in `registry`.
/// Throws UnknownDescriptor.
std::vector<std::byte> tag_persist(const Tag& tag, const DescriptorRegistry& registry);

/// Value-array bytes of an encoded tag (everything after the descriptor id).
std::size_t tag_value_bytes(std::size_t n_bool, std::size_t n_int, std::size_t n_float);

}  // namespace evstore
