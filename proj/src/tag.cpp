#include "evstore/tag.hpp"

#include <charconv>
#include <cstring>
#include <mutex>
#include <unordered_set>

#include "evstore/core_model.hpp"

namespace evstore {

char kind_code(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::kBool: return 'B';
    case AttributeKind::kInt: return 'I';
    case AttributeKind::kFloat: return 'F';
  }
  return '?';
}

std::string_view kind_name(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::kBool: return "bool";
    case AttributeKind::kInt: return "int";
    case AttributeKind::kFloat: return "float";
  }
  return "?";
}

AttributeKind kind_of(const TagValue& value) { return static_cast<AttributeKind>(value.index()); }

TagValue zero_value(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::kBool: return false;
    case AttributeKind::kInt: return std::int32_t{0};
    case AttributeKind::kFloat: return 0.0f;
  }
  return false;
}

std::string format_value(const TagValue& value) {
  if (const bool* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
  if (const auto* i = std::get_if<std::int32_t>(&value)) return std::to_string(*i);
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, std::get<float>(value));
  return std::string(buf, end);
}

bool same_value(const TagValue& a, const TagValue& b) {
  if (a.index() != b.index()) return false;
  if (const float* fa = std::get_if<float>(&a)) {
    const float fb = std::get<float>(b);
    return std::memcmp(fa, &fb, sizeof(float)) == 0;
  }
  return a == b;
}

std::string canonical_encoding(std::span<const AttributeSpec> specs) {
  std::string out;
  bool first = true;
  for (const auto& s : specs) {
    if (s.transient_only) continue;
    if (!first) out += ';';
    first = false;
    out += s.name;
    out += '|';
    out += kind_code(s.kind);
  }
  return out;
}

TagDescriptor TagDescriptor::build(std::vector<AttributeSpec> specs, HashFunction hash) {
  TagDescriptor d;
  d.specs_.reserve(specs.size());
  for (auto& s : specs) {
    if (s.transient_only) continue;
    validate_name(s.name, "attribute name");
    const auto kind = static_cast<std::size_t>(s.kind);
    if (!d.by_name_.emplace(s.name, d.specs_.size()).second) {
      fail(ErrorCode::kDuplicateAttributeName, "attribute '" + s.name + "' declared twice");
    }
    d.slots_.push_back(Slot{s.kind, static_cast<std::uint32_t>(d.counts_[kind]++)});
    d.specs_.push_back(std::move(s));
  }
  d.canonical_ = canonical_encoding(d.specs_);
  d.id_ = hash(d.canonical_);
  return d;
}

TagDescriptor TagDescriptor::from_canonical(std::string_view canonical, HashFunction hash) {
  std::vector<AttributeSpec> specs;
  std::size_t pos = 0;
  while (pos < canonical.size()) {
    const auto end = std::min(canonical.find(';', pos), canonical.size());
    const auto item = canonical.substr(pos, end - pos);
    const auto bar = item.rfind('|');
    if (bar == std::string_view::npos || bar + 2 != item.size()) {
      fail(ErrorCode::kCorruptRecord, "malformed descriptor entry '" + std::string(item) + "'");
    }
    AttributeSpec spec;
    spec.name = std::string(item.substr(0, bar));
    switch (item.back()) {
      case 'B': spec.kind = AttributeKind::kBool; break;
      case 'I': spec.kind = AttributeKind::kInt; break;
      case 'F': spec.kind = AttributeKind::kFloat; break;
      default: fail(ErrorCode::kCorruptRecord, "unknown attribute kind in '" + std::string(item) + "'");
    }
    specs.push_back(std::move(spec));
    if (end == canonical.size()) break;
    pos = end + 1;
    if (pos == canonical.size()) fail(ErrorCode::kCorruptRecord, "trailing ';' in descriptor");
  }
  try {
    return build(std::move(specs), hash);
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptRecord, std::string("invalid stored descriptor: ") + e.what());
  }
}

std::optional<TagDescriptor::Slot> TagDescriptor::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return slots_[it->second];
}

const DescriptorPtr& empty_descriptor() {
  static const DescriptorPtr empty = std::make_shared<const TagDescriptor>(TagDescriptor::build({}));
  return empty;
}

std::vector<AttributeSpec> merge_attribute_lists(std::span<const AttributeSpec> base,
                                                 std::span<const AttributeSpec> extra) {
  std::vector<AttributeSpec> out(base.begin(), base.end());
  std::unordered_map<std::string_view, AttributeKind> kinds;
  for (const auto& s : base) kinds.emplace(s.name, s.kind);
  for (const auto& s : extra) {
    auto it = kinds.find(s.name);
    if (it == kinds.end()) {
      kinds.emplace(s.name, s.kind);
      out.push_back(s);
      continue;
    }
    if (it->second != s.kind) {
      fail(ErrorCode::kKindConflict, "attribute '" + s.name + "' is " + std::string(kind_name(it->second)) +
                                         " in one descriptor and " + std::string(kind_name(s.kind)) + " in another");
    }
  }
  return out;
}

DescriptorPtr DescriptorRegistry::intern(std::vector<AttributeSpec> specs) {
  return adopt(std::make_shared<const TagDescriptor>(TagDescriptor::build(std::move(specs), hash_)));
}

DescriptorPtr DescriptorRegistry::adopt(const DescriptorPtr& descriptor) {
  {
    std::shared_lock lock(mu_);
    auto it = by_id_.find(descriptor->id());
    if (it != by_id_.end()) {
      if (it->second->canonical() != descriptor->canonical()) {
        fail(ErrorCode::kHashCollision, "descriptor id " + std::to_string(descriptor->id()) +
                                            " already names a different attribute list");
      }
      return it->second;
    }
  }
  std::unique_lock lock(mu_);
  auto [it, inserted] = by_id_.emplace(descriptor->id(), descriptor);
  if (!inserted && it->second->canonical() != descriptor->canonical()) {
    fail(ErrorCode::kHashCollision,
         "descriptor id " + std::to_string(descriptor->id()) + " already names a different attribute list");
  }
  return it->second;
}

void DescriptorRegistry::clear() {
  std::unique_lock lock(mu_);
  by_id_.clear();
}

DescriptorPtr DescriptorRegistry::find(std::uint64_t id) const {
  std::shared_lock lock(mu_);
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second;
}

DescriptorPtr DescriptorRegistry::get(std::uint64_t id) const {
  auto d = find(id);
  if (!d) fail(ErrorCode::kUnknownDescriptor, "no descriptor with id " + std::to_string(id));
  return d;
}

bool DescriptorRegistry::contains(const TagDescriptor& descriptor) const {
  auto d = find(descriptor.id());
  return d && d->canonical() == descriptor.canonical();
}

std::size_t DescriptorRegistry::size() const {
  std::shared_lock lock(mu_);
  return by_id_.size();
}

std::vector<DescriptorPtr> DescriptorRegistry::all() const {
  std::shared_lock lock(mu_);
  std::vector<DescriptorPtr> out;
  out.reserve(by_id_.size());
  for (const auto& [id, d] : by_id_) out.push_back(d);
  return out;
}

std::uint64_t descriptor_intern(DescriptorRegistry& registry, std::vector<AttributeSpec> specs) {
  return registry.intern(std::move(specs))->id();
}

Tag::Tag(DescriptorPtr descriptor, std::vector<AttributeSpec> transient_specs)
    : descriptor_(std::move(descriptor)),
      bools_(descriptor_->count(AttributeKind::kBool), false),
      ints_(descriptor_->count(AttributeKind::kInt), 0),
      floats_(descriptor_->count(AttributeKind::kFloat), 0.0f),
      transient_specs_(std::move(transient_specs)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& s : transient_specs_) {
    validate_name(s.name, "attribute name");
    if (descriptor_->find(s.name) || !seen.insert(s.name).second) {
      fail(ErrorCode::kDuplicateAttributeName, "attribute '" + s.name + "' declared twice");
    }
  }
}

Tag Tag::create(DescriptorRegistry& registry, const std::vector<AttributeSpec>& specs) {
  std::vector<AttributeSpec> transient;
  for (const auto& s : specs) {
    if (s.transient_only) transient.push_back(s);
  }
  return Tag(registry.intern(specs), std::move(transient));
}

void Tag::set(std::string_view name, const TagValue& value) {
  for (const auto& s : transient_specs_) {
    if (s.name != name) continue;
    if (s.kind != kind_of(value)) {
      fail(ErrorCode::kKindMismatch, "attribute '" + s.name + "' is " + std::string(kind_name(s.kind)));
    }
    transient_values_[s.name] = value;
    return;
  }
  const auto slot = descriptor_->find(name);
  if (!slot) fail(ErrorCode::kUnknownAttribute, "no attribute '" + std::string(name) + "'");
  if (slot->kind != kind_of(value)) {
    fail(ErrorCode::kKindMismatch, "attribute '" + std::string(name) + "' is " + std::string(kind_name(slot->kind)));
  }
  switch (slot->kind) {
    case AttributeKind::kBool: bools_[slot->index] = std::get<bool>(value); break;
    case AttributeKind::kInt: ints_[slot->index] = std::get<std::int32_t>(value); break;
    case AttributeKind::kFloat: floats_[slot->index] = std::get<float>(value); break;
  }
}

void Tag::set_slot(TagDescriptor::Slot slot, const TagValue& value) {
  if (slot.index >= descriptor_->count(slot.kind) || kind_of(value) != slot.kind) {
    fail(ErrorCode::kInvalidArgument, "bad tag slot");
  }
  switch (slot.kind) {
    case AttributeKind::kBool: bools_[slot.index] = std::get<bool>(value); break;
    case AttributeKind::kInt: ints_[slot.index] = std::get<std::int32_t>(value); break;
    case AttributeKind::kFloat: floats_[slot.index] = std::get<float>(value); break;
  }
}

TagValue Tag::get(std::string_view name) const {
  for (const auto& s : transient_specs_) {
    if (s.name != name) continue;
    auto it = transient_values_.find(s.name);
    return it == transient_values_.end() ? zero_value(s.kind) : it->second;
  }
  const auto slot = descriptor_->find(name);
  if (!slot) fail(ErrorCode::kUnknownAttribute, "no attribute '" + std::string(name) + "'");
  switch (slot->kind) {
    case AttributeKind::kBool: return static_cast<bool>(bools_[slot->index]);
    case AttributeKind::kInt: return ints_[slot->index];
    case AttributeKind::kFloat: return floats_[slot->index];
  }
  return false;
}

bool Tag::has(std::string_view name) const {
  for (const auto& s : transient_specs_) {
    if (s.name == name) return true;
  }
  return descriptor_->find(name).has_value();
}

std::vector<std::pair<std::string, TagValue>> Tag::persistent_values() const {
  std::vector<std::pair<std::string, TagValue>> out;
  out.reserve(descriptor_->specs().size());
  for (const auto& s : descriptor_->specs()) out.emplace_back(s.name, get(s.name));
  return out;
}

Tag Tag::widened_to(DescriptorPtr wider) const {
  Tag out(std::move(wider));
  for (const auto& s : descriptor_->specs()) {
    const auto slot = out.descriptor_->find(s.name);
    if (!slot) fail(ErrorCode::kUnknownAttribute, "target descriptor lacks attribute '" + s.name + "'");
    if (slot->kind != s.kind) fail(ErrorCode::kKindConflict, "attribute '" + s.name + "' changes kind");
    out.set(s.name, get(s.name));
  }
  return out;
}

std::size_t tag_value_bytes(std::size_t n_bool, std::size_t n_int, std::size_t n_float) {
  return (n_bool + 7) / 8 + 4 * n_int + 4 * n_float;
}

std::size_t Tag::encoded_size() const { return 8 + tag_value_bytes(bools_.size(), ints_.size(), floats_.size()); }

std::vector<std::byte> Tag::encode() const {
  ByteWriter w(encoded_size());
  w.put_u64(descriptor_->id());
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < bools_.size(); ++i) {
    if (bools_[i]) acc |= static_cast<std::uint8_t>(1u << (i % 8));
    if (i % 8 == 7) {
      w.put_u8(acc);
      acc = 0;
    }
  }
  if (bools_.size() % 8 != 0) w.put_u8(acc);
  for (auto v : ints_) w.put_i32(v);
  for (auto v : floats_) w.put_f32(v);
  return std::move(w).take();
}

std::uint64_t Tag::peek_descriptor_id(std::span<const std::byte> bytes) { return ByteReader(bytes).u64(); }

Tag Tag::decode(std::span<const std::byte> bytes, const DescriptorLookup& lookup) {
  ByteReader r(bytes);
  const auto id = r.u64();
  auto descriptor = lookup(id);
  if (!descriptor) fail(ErrorCode::kUnknownDescriptor, "tag references unknown descriptor " + std::to_string(id));
  Tag tag(std::move(descriptor));
  const auto packed = r.take((tag.bools_.size() + 7) / 8);
  for (std::size_t i = 0; i < tag.bools_.size(); ++i) {
    tag.bools_[i] = (static_cast<std::uint8_t>(packed[i / 8]) >> (i % 8)) & 1u;
  }
  for (auto& v : tag.ints_) v = r.i32();
  for (auto& v : tag.floats_) v = r.f32();
  r.expect_end();
  return tag;
}

std::vector<std::byte> tag_persist(const Tag& tag, const DescriptorRegistry& registry) {
  if (!registry.contains(tag.descriptor())) {
    fail(ErrorCode::kUnknownDescriptor,
         "descriptor " + std::to_string(tag.descriptor().id()) + " has not been interned");
  }
  return tag.encode();
}

}  // namespace evstore
