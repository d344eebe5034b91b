#pragma once

// Assembly of transient events into the two persistent layouts and the
// single reader that serves both.
//
//   v2: event record {dynamic id, common ref, data refs[], tag ref}
//   v1: event record {header refs[], id ref}, one header object per
//       component, a full id object, and a tag held by the owning collection
//       laid out against that collection's union descriptor.

#include <cstdint>
#include <string>
#include <vector>

#include "evstore/event.hpp"
#include "evstore/event_store.hpp"

namespace evstore {

/// Throws TransactionRequired, DuplicateEventId, name/layout errors.
Oref assemble_v2(WriteTxn& txn, const TransientEvent& event);

/// Creates `collection` as a v1 collection when it does not exist; the new
/// event is owned by it. Throws as assemble_v2, plus KindConflict and
/// InvalidArgument when `collection` is a v2 collection.
Oref assemble_v1(WriteTxn& txn, const TransientEvent& event, const std::string& collection);

/// Throws UnknownRef, CorruptRecord.
TransientEvent read_event(const EventStore& store, const Oref& ref);

/// Format of the committed event at `ref`. Throws UnknownRef.
CollectionFormat event_format(const EventStore& store, const Oref& ref);

/// One shared object's contribution to an event's footprint.
struct FootprintShare {
  RecordType type = RecordType::kCommon;
  std::uint64_t object_id = 0;
  std::uint64_t bytes = 0;
  std::uint64_t sharers = 1;
};

struct NavFootprint {
  CollectionFormat format = CollectionFormat::kV2;
  /// Event record, tag, and for v1 the header and id objects.
  std::uint64_t direct_bytes = 0;
  std::vector<FootprintShare> shares;

  double total() const;
};

/// Navigation bytes of a committed event under the store's byte model.
/// Component payloads are excluded. Throws UnknownRef.
NavFootprint nav_footprint(const EventStore& store, const Oref& ref);

}  // namespace evstore
