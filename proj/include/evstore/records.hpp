#pragma once

// Payload codecs for the structural record types. Framing (type, length,
// CRC) is handled by the segment layer.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evstore/bytes.hpp"
#include "evstore/core_model.hpp"
#include "evstore/tag.hpp"

namespace evstore {

/// Redesigned event: dynamic id fragment inline, one common-object ref, one
/// positional array of data refs, one tag ref.
struct EventV2Record {
  DynamicIdFragment dynamic;
  Oref common;
  std::vector<Oref> data;
  Oref tag;
};

/// Legacy event: one header object per component plus a full id object. Its
/// tag lives in the owning collection.
struct EventV1Record {
  std::vector<Oref> headers;
  Oref id;
};

struct HeaderRecord {
  ComponentEntry entry;
  Oref data;
};

std::vector<std::byte> encode_event_v2(const EventV2Record& rec);
EventV2Record decode_event_v2(std::span<const std::byte> bytes);

std::vector<std::byte> encode_event_v1(const EventV1Record& rec);
EventV1Record decode_event_v1(std::span<const std::byte> bytes);

std::vector<std::byte> encode_header(const HeaderRecord& rec);
HeaderRecord decode_header(std::span<const std::byte> bytes);

/// string label, u32 run, u32 config, u64 event number, u64 timestamp.
std::vector<std::byte> encode_event_id(const EventId& id);
EventId decode_event_id(std::span<const std::byte> bytes);

/// u64 descriptor id, string canonical encoding.
std::vector<std::byte> encode_descriptor(const TagDescriptor& descriptor);
/// Throws CorruptRecord when the stored id does not match the content.
TagDescriptor decode_descriptor(std::span<const std::byte> bytes, HashFunction hash = fnv1a64);

enum class CollectionFormat : std::uint8_t { kV1 = 1, kV2 = 2 };

struct CollectionEntry {
  Oref event;
  bool owned = false;
  /// Collection-resident tag; v1 collections only.
  std::optional<Oref> tag;

  friend bool operator==(const CollectionEntry&, const CollectionEntry&) = default;
};

struct Collection {
  std::string name;
  CollectionFormat format = CollectionFormat::kV2;
  std::vector<CollectionEntry> entries;
  /// Shared descriptor of every tag in a v1 collection.
  std::optional<std::uint64_t> union_descriptor;
};

/// string name, u32 count, count x (Oref, u8 owned), u8 format; v1 adds
/// u8 has_union, [u64 union id], count x tag Oref.
std::vector<std::byte> encode_collection(const Collection& c);
Collection decode_collection(std::span<const std::byte> bytes);

/// Key identifying an event id for uniqueness checks.
std::string event_id_key(const EventId& id);

}  // namespace evstore
