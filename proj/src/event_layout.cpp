#include "evstore/event_layout.hpp"

#include "evstore/byte_model.hpp"

namespace evstore {

namespace {

StoredRecord read_typed(const EventStore& store, const Oref& ref, RecordType want, const char* what) {
  auto rec = store.read(ref);
  if (rec.type != want) {
    fail(ErrorCode::kCorruptRecord, std::string(what) + " ref " + to_string(ref) + " points at a " +
                                        std::string(record_type_name(rec.type)) + " record");
  }
  return rec;
}

/// Model bytes of the tag at `ref`, sized from its descriptor.
std::uint64_t tag_model_bytes(const EventStore& store, const Oref& ref, std::uint64_t* descriptor_id = nullptr) {
  std::vector<std::byte> prefix;
  const auto [type, len] = store.segments().read_prefix(ref, 8, prefix);
  if (type != RecordType::kTag || len < 8) fail(ErrorCode::kCorruptRecord, "bad tag record at " + to_string(ref));
  const auto id = Tag::peek_descriptor_id(prefix);
  const auto d = store.descriptor(id);
  if (descriptor_id) *descriptor_id = id;
  return byte_model::tag(store.model(), d->count(AttributeKind::kBool), d->count(AttributeKind::kInt),
                         d->count(AttributeKind::kFloat));
}

}  // namespace

Oref assemble_v2(WriteTxn& txn, const TransientEvent& event) {
  if (!txn.active()) fail(ErrorCode::kTransactionRequired, "assemble_v2 needs an open write transaction");
  const auto layout = event.layout();
  const auto [fragment, dynamic] = split_event_id(event.id);
  validate_name(fragment.experiment_label, "experiment label");
  txn.claim_event_id(CollectionFormat::kV2, event.id);

  const auto [common_id, common_ref] = txn.intern_common(fragment, layout);
  EventV2Record rec;
  rec.dynamic = dynamic;
  rec.common = common_ref;
  rec.data.reserve(event.components.size());
  for (const auto& c : event.components) rec.data.push_back(txn.put(RecordType::kData, c.payload));
  rec.tag = txn.put_tag(event.tag);
  const auto ref = txn.put(RecordType::kEventV2, encode_event_v2(rec));
  txn.add_common_ref(common_id);
  txn.note_event(ref, CollectionFormat::kV2);
  return ref;
}

Oref assemble_v1(WriteTxn& txn, const TransientEvent& event, const std::string& collection) {
  if (!txn.active()) fail(ErrorCode::kTransactionRequired, "assemble_v1 needs an open write transaction");
  (void)event.layout();
  validate_name(event.id.experiment_label, "experiment label");
  if (!txn.collection_exists(collection)) txn.create_collection(collection, CollectionFormat::kV1);
  if (txn.collection(collection).format != CollectionFormat::kV1) {
    fail(ErrorCode::kInvalidArgument, "'" + collection + "' is not a v1 collection");
  }
  if (txn.store().access(collection) == AccessMode::kReadOnly) {
    fail(ErrorCode::kAccessDenied, "collection '" + collection + "' is read-only");
  }
  txn.check_union(collection, event.tag.descriptor());
  txn.claim_event_id(CollectionFormat::kV1, event.id);

  EventV1Record rec;
  rec.headers.reserve(event.components.size());
  for (const auto& c : event.components) {
    const auto data = txn.put(RecordType::kData, c.payload);
    rec.headers.push_back(txn.put(RecordType::kHeader, encode_header(HeaderRecord{c.entry, data})));
  }
  rec.id = txn.put(RecordType::kId, encode_event_id(event.id));
  const auto ref = txn.put(RecordType::kEventV1, encode_event_v1(rec));
  txn.note_event(ref, CollectionFormat::kV1);
  txn.append_entry(collection, ref, true, event.tag);
  return ref;
}

CollectionFormat event_format(const EventStore& store, const Oref& ref) {
  std::vector<std::byte> scratch;
  const auto [type, len] = store.segments().read_prefix(ref, 0, scratch);
  (void)len;
  if (type == RecordType::kEventV1) return CollectionFormat::kV1;
  if (type == RecordType::kEventV2) return CollectionFormat::kV2;
  fail(ErrorCode::kUnknownRef, to_string(ref) + " is not an event record");
}

TransientEvent read_event(const EventStore& store, const Oref& ref) {
  auto rec = store.read(ref);
  TransientEvent out;
  if (rec.type == RecordType::kEventV2) {
    const auto ev = decode_event_v2(rec.payload);
    const auto common_id = store.common_id_at(ev.common);
    if (!common_id) fail(ErrorCode::kCorruptRecord, "event " + to_string(ref) + " references no common object");
    const auto common = store.common(*common_id);
    const auto& entries = common.layout.entries();
    if (entries.size() != ev.data.size()) {
      fail(ErrorCode::kCorruptRecord, "event " + to_string(ref) + " data array does not match its layout");
    }
    out.id = join_event_id(common.static_fragment, ev.dynamic);
    out.components.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      out.components.push_back(Component{entries[i], read_typed(store, ev.data[i], RecordType::kData, "data").payload});
    }
    out.tag = Tag::decode(read_typed(store, ev.tag, RecordType::kTag, "tag").payload, store.descriptor_lookup());
    return out;
  }
  if (rec.type == RecordType::kEventV1) {
    const auto ev = decode_event_v1(rec.payload);
    out.id = decode_event_id(read_typed(store, ev.id, RecordType::kId, "id").payload);
    out.components.reserve(ev.headers.size());
    for (const auto& h : ev.headers) {
      auto header = decode_header(read_typed(store, h, RecordType::kHeader, "header").payload);
      out.components.push_back(
          Component{std::move(header.entry), read_typed(store, header.data, RecordType::kData, "data").payload});
    }
    const auto tag_ref = store.v1_tag_ref(ref);
    if (!tag_ref) fail(ErrorCode::kCorruptRecord, "v1 event " + to_string(ref) + " has no collection tag");
    out.tag = Tag::decode(read_typed(store, *tag_ref, RecordType::kTag, "tag").payload, store.descriptor_lookup());
    return out;
  }
  fail(ErrorCode::kUnknownRef, to_string(ref) + " is not an event record");
}

double NavFootprint::total() const {
  double t = static_cast<double>(direct_bytes);
  for (const auto& s : shares) t += static_cast<double>(s.bytes) / static_cast<double>(s.sharers ? s.sharers : 1);
  return t;
}

NavFootprint nav_footprint(const EventStore& store, const Oref& ref) {
  const auto& m = store.model();
  auto rec = store.read(ref);
  NavFootprint out;
  if (rec.type == RecordType::kEventV2) {
    out.format = CollectionFormat::kV2;
    const auto ev = decode_event_v2(rec.payload);
    out.direct_bytes = byte_model::event_v2(m, ev.data.size()) + tag_model_bytes(store, ev.tag);
    const auto common_id = store.common_id_at(ev.common);
    if (!common_id) fail(ErrorCode::kCorruptRecord, "event " + to_string(ref) + " references no common object");
    const auto common = store.common(*common_id);
    out.shares.push_back(FootprintShare{
        RecordType::kCommon, common.common_id,
        byte_model::common(m, common.static_fragment.experiment_label.size(), common.layout.packed_form().size()),
        common.ref_count});
    return out;
  }
  if (rec.type == RecordType::kEventV1) {
    out.format = CollectionFormat::kV1;
    const auto ev = decode_event_v1(rec.payload);
    std::uint64_t bytes = byte_model::event_v1(m, ev.headers.size());
    for (const auto& h : ev.headers) {
      const auto header = decode_header(read_typed(store, h, RecordType::kHeader, "header").payload);
      bytes += byte_model::header(m, header.entry.key.size(), header.entry.type_name.size());
    }
    const auto id = decode_event_id(read_typed(store, ev.id, RecordType::kId, "id").payload);
    bytes += byte_model::id_object(m, id.experiment_label.size());
    const auto owner = store.owner_of(ref);
    const auto tag_ref = store.v1_tag_ref(ref);
    if (!owner || !tag_ref) fail(ErrorCode::kCorruptRecord, "v1 event " + to_string(ref) + " has no collection tag");
    std::uint64_t union_id = 0;
    bytes += tag_model_bytes(store, *tag_ref, &union_id);
    out.direct_bytes = bytes;
    const auto u = store.descriptor(union_id);
    out.shares.push_back(FootprintShare{RecordType::kDescriptor, union_id,
                                        byte_model::descriptor(m, u->canonical().size()),
                                        store.collection_size(owner->collection)});
    return out;
  }
  fail(ErrorCode::kUnknownRef, to_string(ref) + " is not an event record");
}

}  // namespace evstore
