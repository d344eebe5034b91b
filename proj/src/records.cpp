#include "evstore/records.hpp"

namespace evstore {

std::vector<std::byte> encode_event_v2(const EventV2Record& rec) {
  ByteWriter w(16 + kOrefWireBytes * (rec.data.size() + 2) + 4);
  w.put_u64(rec.dynamic.event_number);
  w.put_u64(rec.dynamic.timestamp_us);
  w.put_oref(rec.common);
  w.put_u32(static_cast<std::uint32_t>(rec.data.size()));
  for (const auto& d : rec.data) w.put_oref(d);
  w.put_oref(rec.tag);
  return std::move(w).take();
}

EventV2Record decode_event_v2(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  EventV2Record rec;
  rec.dynamic.event_number = r.u64();
  rec.dynamic.timestamp_us = r.u64();
  rec.common = r.oref();
  const auto n = r.u32();
  if (n > r.remaining() / kOrefWireBytes) fail(ErrorCode::kCorruptRecord, "event data array overruns record");
  rec.data.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) rec.data.push_back(r.oref());
  rec.tag = r.oref();
  r.expect_end();
  return rec;
}

std::vector<std::byte> encode_event_v1(const EventV1Record& rec) {
  ByteWriter w(4 + kOrefWireBytes * (rec.headers.size() + 1));
  w.put_u32(static_cast<std::uint32_t>(rec.headers.size()));
  for (const auto& h : rec.headers) w.put_oref(h);
  w.put_oref(rec.id);
  return std::move(w).take();
}

EventV1Record decode_event_v1(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  EventV1Record rec;
  const auto n = r.u32();
  if (n > r.remaining() / kOrefWireBytes) fail(ErrorCode::kCorruptRecord, "event header array overruns record");
  rec.headers.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) rec.headers.push_back(r.oref());
  rec.id = r.oref();
  r.expect_end();
  return rec;
}

std::vector<std::byte> encode_header(const HeaderRecord& rec) {
  ByteWriter w;
  w.put_string(rec.entry.key);
  w.put_string(rec.entry.type_name);
  w.put_oref(rec.data);
  return std::move(w).take();
}

HeaderRecord decode_header(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  HeaderRecord rec;
  rec.entry.key = r.string();
  rec.entry.type_name = r.string();
  rec.data = r.oref();
  r.expect_end();
  return rec;
}

std::vector<std::byte> encode_event_id(const EventId& id) {
  ByteWriter w;
  w.put_string(id.experiment_label);
  w.put_u32(id.run_number);
  w.put_u32(id.config_key);
  w.put_u64(id.event_number);
  w.put_u64(id.timestamp_us);
  return std::move(w).take();
}

EventId decode_event_id(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  EventId id;
  id.experiment_label = r.string();
  id.run_number = r.u32();
  id.config_key = r.u32();
  id.event_number = r.u64();
  id.timestamp_us = r.u64();
  r.expect_end();
  return id;
}

std::vector<std::byte> encode_descriptor(const TagDescriptor& descriptor) {
  ByteWriter w;
  w.put_u64(descriptor.id());
  w.put_string(descriptor.canonical());
  return std::move(w).take();
}

TagDescriptor decode_descriptor(std::span<const std::byte> bytes, HashFunction hash) {
  ByteReader r(bytes);
  const auto id = r.u64();
  const auto canonical = r.string();
  r.expect_end();
  auto d = TagDescriptor::from_canonical(canonical, hash);
  if (d.id() != id) fail(ErrorCode::kCorruptRecord, "descriptor id does not match its content");
  return d;
}

std::vector<std::byte> encode_collection(const Collection& c) {
  ByteWriter w(c.name.size() + 16 + c.entries.size() * (2 * kOrefWireBytes + 1));
  w.put_string(c.name);
  w.put_u32(static_cast<std::uint32_t>(c.entries.size()));
  for (const auto& e : c.entries) {
    w.put_oref(e.event);
    w.put_u8(e.owned ? 1 : 0);
  }
  w.put_u8(static_cast<std::uint8_t>(c.format));
  if (c.format == CollectionFormat::kV1) {
    w.put_u8(c.union_descriptor ? 1 : 0);
    if (c.union_descriptor) w.put_u64(*c.union_descriptor);
    for (const auto& e : c.entries) w.put_oref(e.tag.value_or(Oref{}));
  }
  return std::move(w).take();
}

Collection decode_collection(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  Collection c;
  c.name = r.string();
  const auto n = r.u32();
  if (n > r.remaining() / (kOrefWireBytes + 1)) fail(ErrorCode::kCorruptRecord, "collection entries overrun record");
  c.entries.resize(n);
  for (auto& e : c.entries) {
    e.event = r.oref();
    const auto owned = r.u8();
    if (owned > 1) fail(ErrorCode::kCorruptRecord, "bad ownership flag");
    e.owned = owned == 1;
  }
  const auto format = r.u8();
  if (format == static_cast<std::uint8_t>(CollectionFormat::kV1)) {
    c.format = CollectionFormat::kV1;
    if (r.u8() == 1) c.union_descriptor = r.u64();
    for (auto& e : c.entries) e.tag = r.oref();
  } else if (format == static_cast<std::uint8_t>(CollectionFormat::kV2)) {
    c.format = CollectionFormat::kV2;
  } else {
    fail(ErrorCode::kCorruptRecord, "unknown collection format " + std::to_string(format));
  }
  r.expect_end();
  return c;
}

std::string event_id_key(const EventId& id) {
  ByteWriter w;
  w.put_string(id.experiment_label);
  w.put_u32(id.run_number);
  w.put_u32(id.config_key);
  w.put_u64(id.event_number);
  const auto& b = w.bytes();
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

}  // namespace evstore
