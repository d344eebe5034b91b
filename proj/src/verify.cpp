#include "evstore/verify.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "evstore/common_store.hpp"
#include "evstore/records.hpp"
#include "evstore/storage.hpp"
#include "evstore/tag.hpp"

namespace evstore {

namespace {

constexpr std::size_t kMaxListed = 20;

class Checks {
 public:
  VerifyCheck& get(const std::string& name) {
    for (auto& c : checks_) {
      if (c.name == name) return c;
    }
    checks_.push_back(VerifyCheck{name, true, 0, {}});
    return checks_.back();
  }

  void failure(const std::string& name, const Oref& ref, const std::string& msg) {
    failure(name, to_string(ref) + ": " + msg);
  }

  void failure(const std::string& name, const std::string& msg) {
    auto& c = get(name);
    c.passed = false;
    ++c.failure_count;
    if (c.failures.size() < kMaxListed) c.failures.push_back(msg);
  }

  std::vector<VerifyCheck> take() && { return std::move(checks_); }

 private:
  std::vector<VerifyCheck> checks_;
};

struct Rec {
  Oref ref;
  RecordType type;
  bool reached = false;
};

struct TagInfo {
  std::uint64_t descriptor_id = 0;
  std::uint32_t length = 0;
};

}  // namespace

bool VerifyReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

const VerifyCheck* VerifyReport::check(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

VerifyReport verify_store(const std::filesystem::path& dir) {
  VerifyReport report;
  Checks checks;
  for (const char* name : {"open", "framing", "crc", "decode", "references", "union_layout", "object_count_law",
                           "no_orphans", "ownership", "descriptor_interning", "common_interning",
                           "event_id_uniqueness"}) {
    checks.get(name);
  }

  std::unique_ptr<SegmentStore> segments;
  try {
    segments = SegmentStore::open(dir);
  } catch (const std::exception& e) {
    checks.failure("open", e.what());
    report.checks = std::move(checks).take();
    return report;
  }

  std::vector<Rec> recs;
  std::map<Oref, TagInfo> tags;
  std::map<Oref, TagDescriptor> descriptors;
  std::map<Oref, CommonObject> commons;
  std::map<Oref, EventId> ids;
  std::unordered_map<Oref, Oref, OrefHash> header_data;
  std::map<Oref, EventV1Record> v1_events;
  std::map<Oref, EventV2Record> v2_events;
  std::vector<std::pair<Oref, Collection>> collections;

  ScanOptions opts;
  opts.verify_crc = true;
  const auto problems = segments->scan(opts, [&](const ScannedRecord& r) {
    recs.push_back(Rec{r.ref, r.type});
    report.record_counts[std::string(record_type_name(r.type))] += 1;
    if (!r.crc_ok) {
      report.bad_crc.push_back(r.ref);
      checks.failure("crc", r.ref, "checksum mismatch in " + std::string(record_type_name(r.type)) + " record");
      return;
    }
    try {
      switch (r.type) {
        case RecordType::kTag:
          tags[r.ref] = TagInfo{Tag::peek_descriptor_id(r.payload), r.length};
          break;
        case RecordType::kDescriptor:
          descriptors.emplace(r.ref, decode_descriptor(r.payload));
          break;
        case RecordType::kCommon: {
          auto c = decode_common(r.payload);
          if (c.common_id != fnv1a64(common_content_key(c.static_fragment, c.layout))) {
            fail(ErrorCode::kCorruptRecord, "common id does not match its content");
          }
          commons.emplace(r.ref, std::move(c));
          break;
        }
        case RecordType::kId: ids.emplace(r.ref, decode_event_id(r.payload)); break;
        case RecordType::kHeader: header_data.emplace(r.ref, decode_header(r.payload).data); break;
        case RecordType::kEventV1: v1_events.emplace(r.ref, decode_event_v1(r.payload)); break;
        case RecordType::kEventV2: v2_events.emplace(r.ref, decode_event_v2(r.payload)); break;
        case RecordType::kCollection: collections.emplace_back(r.ref, decode_collection(r.payload)); break;
        case RecordType::kData: break;
      }
    } catch (const std::exception& e) {
      checks.failure("decode", r.ref, e.what());
    }
  });
  for (const auto& p : problems) checks.failure("framing", p.ref, p.message);

  // Records are delivered in (segment, offset) order.
  auto find = [&](const Oref& ref) -> Rec* {
    auto it = std::lower_bound(recs.begin(), recs.end(), ref, [](const Rec& r, const Oref& o) { return r.ref < o; });
    return it != recs.end() && it->ref == ref ? &*it : nullptr;
  };
  auto reach = [&](const Oref& from, const Oref& ref, RecordType want, const char* what) -> bool {
    Rec* r = find(ref);
    if (!r) {
      checks.failure("references", from, std::string(what) + " ref " + to_string(ref) + " resolves to no record");
      return false;
    }
    if (r->type != want) {
      checks.failure("references", from,
                     std::string(what) + " ref " + to_string(ref) + " is a " +
                         std::string(record_type_name(r->type)) + " record");
      return false;
    }
    r->reached = true;
    return true;
  };

  std::unordered_map<std::uint64_t, std::vector<Oref>> descriptor_by_id;
  for (const auto& [ref, d] : descriptors) descriptor_by_id[d.id()].push_back(ref);
  auto reach_descriptor = [&](const Oref& from, std::uint64_t id) -> const TagDescriptor* {
    auto it = descriptor_by_id.find(id);
    if (it == descriptor_by_id.end()) {
      checks.failure("references", from, "descriptor " + std::to_string(id) + " is not stored");
      return nullptr;
    }
    for (const auto& ref : it->second) find(ref)->reached = true;
    return &descriptors.at(it->second.front());
  };

  // Tags: descriptor exists and the value arrays have the size it implies.
  for (const auto& [ref, info] : tags) {
    const auto* d = reach_descriptor(ref, info.descriptor_id);
    if (!d) continue;
    const auto expected = 8 + tag_value_bytes(d->count(AttributeKind::kBool), d->count(AttributeKind::kInt),
                                              d->count(AttributeKind::kFloat));
    if (info.length != expected) {
      checks.failure("decode", ref,
                     "tag is " + std::to_string(info.length) + " bytes, descriptor implies " + std::to_string(expected));
    }
  }

  // Collections: every version is a root; the last version per name is current.
  std::map<std::string, const Collection*> current;
  std::set<Oref> v1_collection_tags;
  for (const auto& [ref, c] : collections) {
    current[c.name] = &c;
    for (const auto& e : c.entries) {
      Rec* r = find(e.event);
      if (!r || (r->type != RecordType::kEventV1 && r->type != RecordType::kEventV2)) {
        checks.failure("references", ref, "collection '" + c.name + "' entry " + to_string(e.event) + " is no event");
      } else {
        r->reached = true;
      }
      if (c.format == CollectionFormat::kV1 && e.tag) {
        if (reach(ref, *e.tag, RecordType::kTag, "collection tag")) v1_collection_tags.insert(*e.tag);
      }
    }
    if (c.format == CollectionFormat::kV1) {
      if (c.union_descriptor) {
        reach_descriptor(ref, *c.union_descriptor);
      } else if (!c.entries.empty()) {
        checks.failure("union_layout", ref, "v1 collection '" + c.name + "' has entries but no union descriptor");
      }
    }
  }
  std::set<std::uint64_t> unions;
  for (const auto& [name, c] : current) {
    if (c->format != CollectionFormat::kV1 || !c->union_descriptor) continue;
    unions.insert(*c->union_descriptor);
    for (const auto& e : c->entries) {
      auto it = e.tag ? tags.find(*e.tag) : tags.end();
      if (it != tags.end() && it->second.descriptor_id != *c->union_descriptor) {
        checks.failure("union_layout", *e.tag, "tag in '" + name + "' is not laid out against the union descriptor");
      }
    }
  }

  // Events.
  std::uint64_t v2_components = 0;
  std::uint64_t v1_components = 0;
  std::unordered_set<std::string> v1_keys, v2_keys;
  for (const auto& [ref, ev] : v2_events) {
    v2_components += ev.data.size();
    for (const auto& d : ev.data) reach(ref, d, RecordType::kData, "data");
    reach(ref, ev.tag, RecordType::kTag, "tag");
    if (reach(ref, ev.common, RecordType::kCommon, "common")) {
      auto it = commons.find(ev.common);
      if (it != commons.end()) {
        if (it->second.layout.size() != ev.data.size()) {
          checks.failure("decode", ref, "data array length differs from the common layout");
        }
        if (!v2_keys.insert(event_id_key(join_event_id(it->second.static_fragment, ev.dynamic))).second) {
          checks.failure("event_id_uniqueness", ref, "duplicate v2 event id");
        }
      }
    }
  }
  for (const auto& [ref, ev] : v1_events) {
    v1_components += ev.headers.size();
    for (const auto& h : ev.headers) {
      if (!reach(ref, h, RecordType::kHeader, "header")) continue;
      auto it = header_data.find(h);
      if (it != header_data.end()) reach(h, it->second, RecordType::kData, "data");
    }
    if (reach(ref, ev.id, RecordType::kId, "id")) {
      auto it = ids.find(ev.id);
      if (it != ids.end() && !v1_keys.insert(event_id_key(it->second)).second) {
        checks.failure("event_id_uniqueness", ref, "duplicate v1 event id");
      }
    }
  }
  // Ownership over the current collection versions.
  std::unordered_map<Oref, std::uint32_t, OrefHash> owned;
  for (const auto& [name, c] : current) {
    for (const auto& e : c->entries) {
      if (e.owned) owned[e.event] += 1;
    }
  }
  auto check_owned = [&](const Oref& ref) {
    auto it = owned.find(ref);
    const std::uint32_t n = it == owned.end() ? 0 : it->second;
    if (n != 1) checks.failure("ownership", ref, "event owned by " + std::to_string(n) + " collections");
  };
  for (const auto& [ref, ev] : v2_events) check_owned(ref);
  for (const auto& [ref, ev] : v1_events) check_owned(ref);
  for (const auto& [ref, n] : owned) {
    if (!v1_events.count(ref) && !v2_events.count(ref)) checks.failure("ownership", ref, "owned entry is no event");
  }

  // Interning.
  std::map<std::string, Oref> canon_seen;
  for (const auto& [ref, d] : descriptors) {
    auto [it, inserted] = canon_seen.emplace(d.canonical(), ref);
    if (!inserted) {
      checks.failure("descriptor_interning", ref, "duplicates descriptor at " + to_string(it->second));
    }
  }
  std::map<std::string, Oref> common_seen;
  for (const auto& [ref, c] : commons) {
    auto [it, inserted] = common_seen.emplace(common_content_key(c.static_fragment, c.layout), ref);
    if (!inserted) checks.failure("common_interning", ref, "duplicates common object at " + to_string(it->second));
  }

  // Orphans and the object-count law.
  std::uint64_t non_collection = 0;
  for (const auto& r : recs) {
    if (r.type == RecordType::kCollection) continue;
    ++non_collection;
    if (!r.reached) {
      checks.failure("no_orphans", r.ref, std::string(record_type_name(r.type)) + " record is not referenced");
    }
  }
  const std::uint64_t e2 = v2_events.size();
  const std::uint64_t e1 = v1_events.size();
  const std::uint64_t expected = 2 * e2 + v2_components + commons.size() + descriptors.size() + 2 * e1 +
                                 2 * v1_components + v1_collection_tags.size();
  if (expected != non_collection) {
    checks.failure("object_count_law", "found " + std::to_string(non_collection) + " objects, layout laws give " +
                                           std::to_string(expected));
  }

  report.descriptors = descriptors.size();
  report.union_descriptors = unions.size();
  report.commons = commons.size();
  report.events_v1 = e1;
  report.events_v2 = e2;
  report.collections = current.size();
  report.checks = std::move(checks).take();
  return report;
}

std::string format_verify_report(const VerifyReport& report) {
  std::ostringstream out;
  for (const auto& c : report.checks) {
    out << "check." << c.name << '=' << (c.passed ? "pass" : "FAIL");
    if (!c.passed) out << " (" << c.failure_count << ")";
    out << '\n';
    for (const auto& f : c.failures) out << "  " << f << '\n';
  }
  for (const auto& [type, n] : report.record_counts) out << "records." << type << '=' << n << '\n';
  out << "events_v1=" << report.events_v1 << '\n'
      << "events_v2=" << report.events_v2 << '\n'
      << "collections=" << report.collections << '\n'
      << "descriptors=" << report.descriptors << '\n'
      << "union_descriptors=" << report.union_descriptors << '\n'
      << "commons=" << report.commons << '\n'
      << "status=" << (report.ok() ? "ok" : "corrupt") << '\n';
  return out.str();
}

}  // namespace evstore
