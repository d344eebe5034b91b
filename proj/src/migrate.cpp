#include "evstore/migrate.hpp"

#include <unordered_set>

#include "evstore/event_layout.hpp"

namespace evstore {

MigrateResult migrate(EventStore& store, const std::string& input, const std::string& output) {
  const auto src = store.collection(input);
  auto txn = store.begin();
  txn.create_collection(output, CollectionFormat::kV2);
  MigrateResult result;
  std::unordered_set<Oref, OrefHash> seen;
  for (const auto& entry : src.entries) {
    if (!seen.insert(entry.event).second) continue;
    if (event_format(store, entry.event) != CollectionFormat::kV1) {
      fail(ErrorCode::kInvalidArgument, "collection '" + input + "' holds a non-v1 event at " + to_string(entry.event));
    }
    auto event = read_event(store, entry.event);
    const auto ref = assemble_v2(txn, event);
    txn.append_entry(output, ref, true, Tag());
    result.mapping.emplace_back(entry.event, ref);
  }
  txn.commit();
  result.output = store.collection(output);
  return result;
}

}  // namespace evstore
