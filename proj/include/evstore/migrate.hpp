#pragma once

#include <string>
#include <utility>
#include <vector>

#include "evstore/event_store.hpp"

namespace evstore {

struct MigrateResult {
  Collection output;
  /// (v1 event, its v2 copy) in input order.
  std::vector<std::pair<Oref, Oref>> mapping;
};

/// Re-persists every event of v1 collection `input` in the v2 layout, owned
/// by a new v2 collection `output`, in one transaction. The v1 records are
/// left untouched. Throws UnknownCollection, NameExists, InvalidArgument
/// (input holds non-v1 events), DuplicateEventId.
MigrateResult migrate(EventStore& store, const std::string& input, const std::string& output);

}  // namespace evstore
