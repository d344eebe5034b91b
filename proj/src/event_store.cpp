#include "evstore/event_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <sstream>

namespace evstore {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "MANIFEST";

std::uint32_t type_bit(RecordType t) { return 1u << static_cast<unsigned>(t); }

std::uint64_t parse_u64(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    fail(ErrorCode::kNotAStore, "MANIFEST: bad value for " + std::string(what));
  }
  return v;
}

bool path_covers(std::string_view rule, std::string_view path) {
  if (rule == "/") return true;
  if (path.size() < rule.size() || path.substr(0, rule.size()) != rule) return false;
  return path.size() == rule.size() || path[rule.size()] == '/';
}

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
         c == '-';
}

}  // namespace

std::string_view access_mode_name(AccessMode mode) {
  return mode == AccessMode::kReadOnly ? "read-only" : "read-write";
}

AccessMode parse_access_mode(std::string_view text) {
  if (text == "read-only") return AccessMode::kReadOnly;
  if (text == "read-write") return AccessMode::kReadWrite;
  fail(ErrorCode::kInvalidArgument, "access mode must be read-only or read-write, got '" + std::string(text) + "'");
}

void validate_collection_name(std::string_view name) {
  if (name.size() < 2 || name.front() != '/') fail(ErrorCode::kBadName, "collection name must be an absolute path");
  if (name.size() > 4096) fail(ErrorCode::kBadName, "collection name too long");
  std::size_t start = 1;
  while (start <= name.size()) {
    auto end = name.find('/', start);
    if (end == std::string_view::npos) end = name.size();
    const auto part = name.substr(start, end - start);
    if (part.empty()) fail(ErrorCode::kBadName, "empty path component in '" + std::string(name) + "'");
    if (part == "." || part == "..") fail(ErrorCode::kBadName, "relative component in '" + std::string(name) + "'");
    for (char c : part) {
      if (!is_name_char(c)) {
        fail(ErrorCode::kBadName, "illegal character '" + std::string(1, c) + "' in '" + std::string(name) + "'");
      }
    }
    start = end + 1;
  }
}

// ---------------------------------------------------------------------------
// EventStore

EventStore::EventStore(fs::path dir, StoreConfig config, std::unique_ptr<SegmentStore> segments)
    : dir_(std::move(dir)), config_(config), segments_(std::move(segments)) {}

EventStore::~EventStore() = default;

std::unique_ptr<EventStore> EventStore::create(const fs::path& dir, const StoreConfig& config, StoreOptions options) {
  if (fs::exists(dir / kManifest) || fs::exists(dir / "journal.bin")) {
    fail(ErrorCode::kStoreExists, "a store already exists at " + dir.string());
  }
  if (config.segment_roll_bytes < 4096) fail(ErrorCode::kInvalidArgument, "segment roll must be at least 4096 bytes");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
  options.segment_roll_bytes = config.segment_roll_bytes;
  auto segments = SegmentStore::create(dir, options);
  std::unique_ptr<EventStore> store(new EventStore(dir, config, std::move(segments)));
  store->write_manifest();
  return store;
}

std::unique_ptr<EventStore> EventStore::open(const fs::path& dir, StoreOptions options) {
  if (!fs::exists(dir / kManifest)) fail(ErrorCode::kNotAStore, dir.string() + " is not an event store");
  std::unique_ptr<EventStore> store(new EventStore(dir, StoreConfig{}, nullptr));
  store->load_manifest();
  options.segment_roll_bytes = store->config_.segment_roll_bytes;
  store->segments_ = SegmentStore::open(dir, options);
  store->load_catalog();
  return store;
}

void EventStore::load_manifest() {
  std::ifstream in(dir_ / kManifest);
  if (!in) fail(ErrorCode::kNotAStore, "cannot read MANIFEST in " + dir_.string());
  StoreConfig cfg;
  std::map<std::string, AccessMode, std::less<>> rules;
  bool version_seen = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.rfind('=');
    if (eq == std::string::npos) fail(ErrorCode::kNotAStore, "MANIFEST: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format_version") {
      if (parse_u64(value, key) != kFormatVersion) fail(ErrorCode::kNotAStore, "unsupported format version " + value);
      version_seen = true;
    } else if (key == "object_header_bytes") {
      cfg.model.object_header = parse_u64(value, key);
    } else if (key == "oref_bytes") {
      cfg.model.oref = parse_u64(value, key);
    } else if (key == "u32_bytes") {
      cfg.model.u32 = parse_u64(value, key);
    } else if (key == "u64_bytes") {
      cfg.model.u64 = parse_u64(value, key);
    } else if (key == "string_prefix_bytes") {
      cfg.model.string_prefix = parse_u64(value, key);
    } else if (key == "segment_roll_bytes") {
      cfg.segment_roll_bytes = parse_u64(value, key);
    } else if (key.rfind("access:", 0) == 0) {
      try {
        rules[key.substr(7)] = parse_access_mode(value);
      } catch (const Error&) {
        fail(ErrorCode::kNotAStore, "MANIFEST: bad access rule '" + line + "'");
      }
    }
  }
  if (!version_seen) fail(ErrorCode::kNotAStore, "MANIFEST has no format_version");
  std::unique_lock lock(mu_);
  config_ = cfg;
  access_rules_ = std::move(rules);
}

void EventStore::write_manifest() const {
  std::ostringstream out;
  out << "format_version=" << kFormatVersion << '\n'
      << "object_header_bytes=" << config_.model.object_header << '\n'
      << "oref_bytes=" << config_.model.oref << '\n'
      << "u32_bytes=" << config_.model.u32 << '\n'
      << "u64_bytes=" << config_.model.u64 << '\n'
      << "string_prefix_bytes=" << config_.model.string_prefix << '\n'
      << "segment_roll_bytes=" << config_.segment_roll_bytes << '\n';
  {
    std::shared_lock lock(mu_);
    for (const auto& [path, mode] : access_rules_) out << "access:" << path << '=' << access_mode_name(mode) << '\n';
  }
  const auto tmp = dir_ / "MANIFEST.tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    f << out.str();
    f.flush();
    if (!f) fail(ErrorCode::kIoFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, dir_ / kManifest, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot replace MANIFEST: " + ec.message());
}

void EventStore::load_catalog() {
  DescriptorRegistry descriptors;
  std::unordered_map<std::uint64_t, Oref> descriptor_refs;
  CommonRegistry commons;
  std::unordered_map<std::uint64_t, Oref> common_refs;
  std::unordered_map<Oref, std::uint64_t, OrefHash> common_at;
  std::map<std::string, Collection, std::less<>> collections;
  std::unordered_set<std::string> v1_ids, v2_ids;
  std::map<RecordType, std::uint64_t> counts;
  std::unordered_map<Oref, std::string, OrefHash> id_keys;
  std::vector<std::pair<Oref, EventV1Record>> v1_events;
  std::vector<std::pair<Oref, EventV2Record>> v2_events;

  ScanOptions opts;
  opts.full_payload_types = type_bit(RecordType::kEventV1) | type_bit(RecordType::kEventV2) |
                            type_bit(RecordType::kId) | type_bit(RecordType::kCommon) |
                            type_bit(RecordType::kDescriptor) | type_bit(RecordType::kCollection);
  auto problems = segments_->scan(opts, [&](const ScannedRecord& rec) {
    counts[rec.type] += 1;
    if (rec.crc_checked && !rec.crc_ok) fail(ErrorCode::kCorruptRecord, "checksum mismatch at " + to_string(rec.ref));
    switch (rec.type) {
      case RecordType::kDescriptor: {
        auto d = std::make_shared<const TagDescriptor>(decode_descriptor(rec.payload));
        descriptors.adopt(d);
        descriptor_refs.emplace(d->id(), rec.ref);
        break;
      }
      case RecordType::kCommon: {
        auto c = decode_common(rec.payload);
        if (c.common_id != fnv1a64(common_content_key(c.static_fragment, c.layout))) {
          fail(ErrorCode::kCorruptRecord, "common object id mismatch at " + to_string(rec.ref));
        }
        commons.adopt(c);
        common_refs.emplace(c.common_id, rec.ref);
        common_at[rec.ref] = c.common_id;
        break;
      }
      case RecordType::kId:
        id_keys[rec.ref] = event_id_key(decode_event_id(rec.payload));
        break;
      case RecordType::kEventV1:
        v1_events.emplace_back(rec.ref, decode_event_v1(rec.payload));
        break;
      case RecordType::kEventV2:
        v2_events.emplace_back(rec.ref, decode_event_v2(rec.payload));
        break;
      case RecordType::kCollection: {
        auto c = decode_collection(rec.payload);
        std::string name = c.name;
        collections[name] = std::move(c);
        break;
      }
      default:
        break;
    }
  });
  if (!problems.empty()) {
    fail(ErrorCode::kCorruptRecord, "at " + to_string(problems.front().ref) + ": " + problems.front().message);
  }

  for (const auto& [ref, ev] : v1_events) {
    auto it = id_keys.find(ev.id);
    if (it == id_keys.end()) fail(ErrorCode::kCorruptRecord, "v1 event " + to_string(ref) + " has no id object");
    v1_ids.insert(it->second);
  }
  for (const auto& [ref, ev] : v2_events) {
    auto it = common_at.find(ev.common);
    if (it == common_at.end()) fail(ErrorCode::kCorruptRecord, "v2 event " + to_string(ref) + " has no common object");
    commons.add_refs(it->second, 1);
    const auto obj = commons.get(it->second);
    v2_ids.insert(event_id_key(join_event_id(obj.static_fragment, ev.dynamic)));
  }

  std::unique_lock lock(mu_);
  descriptors_.clear();
  for (const auto& d : descriptors.all()) descriptors_.adopt(d);
  commons_.clear();
  for (const auto& c : commons.all()) commons_.adopt(c);
  descriptor_refs_ = std::move(descriptor_refs);
  common_refs_ = std::move(common_refs);
  common_at_ = std::move(common_at);
  collections_ = std::move(collections);
  v1_ids_ = std::move(v1_ids);
  v2_ids_ = std::move(v2_ids);
  record_counts_ = std::move(counts);
  rebuild_owners();
}

void EventStore::rebuild_owners() {
  owners_.clear();
  for (const auto& [name, c] : collections_) {
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
      if (c.entries[i].owned) owners_[c.entries[i].event] = Owner{name, i};
    }
  }
}

WriteTxn EventStore::begin() {
  if (txn_open_) fail(ErrorCode::kWriterBusy, "a write transaction is already open");
  const bool changed = segments_->begin();
  try {
    load_manifest();
    if (changed) load_catalog();
  } catch (...) {
    segments_->abort();
    throw;
  }
  txn_open_ = true;
  return WriteTxn(*this);
}

Tag EventStore::read_tag(const Oref& ref) const {
  auto rec = segments_->read(ref);
  if (rec.type != RecordType::kTag) fail(ErrorCode::kUnknownRef, to_string(ref) + " is not a tag record");
  return Tag::decode(rec.payload, descriptor_lookup());
}

DescriptorPtr EventStore::descriptor(std::uint64_t id) const { return descriptors_.get(id); }
DescriptorPtr EventStore::find_descriptor(std::uint64_t id) const { return descriptors_.find(id); }

DescriptorLookup EventStore::descriptor_lookup() const {
  return [this](std::uint64_t id) { return descriptors_.get(id); };
}

std::size_t EventStore::descriptor_count() const { return descriptors_.size(); }
std::vector<DescriptorPtr> EventStore::descriptors() const { return descriptors_.all(); }

CommonObject EventStore::common(std::uint64_t id) const { return commons_.get(id); }

std::optional<std::uint64_t> EventStore::common_id_at(const Oref& ref) const {
  std::shared_lock lock(mu_);
  auto it = common_at_.find(ref);
  if (it == common_at_.end()) return std::nullopt;
  return it->second;
}

std::size_t EventStore::common_count() const { return commons_.size(); }
std::vector<CommonObject> EventStore::commons() const { return commons_.all(); }

std::optional<Collection> EventStore::find_collection(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = collections_.find(name);
  if (it == collections_.end()) return std::nullopt;
  return it->second;
}

Collection EventStore::collection(std::string_view name) const {
  auto c = find_collection(name);
  if (!c) fail(ErrorCode::kUnknownCollection, "no collection named '" + std::string(name) + "'");
  return std::move(*c);
}

std::vector<std::string> EventStore::collection_names() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  out.reserve(collections_.size());
  for (const auto& [name, c] : collections_) out.push_back(name);
  return out;
}

std::size_t EventStore::collection_size(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = collections_.find(name);
  if (it == collections_.end()) fail(ErrorCode::kUnknownCollection, "no collection named '" + std::string(name) + "'");
  return it->second.entries.size();
}

std::optional<Owner> EventStore::owner_of(const Oref& event) const {
  std::shared_lock lock(mu_);
  auto it = owners_.find(event);
  if (it == owners_.end()) return std::nullopt;
  return it->second;
}

std::optional<Oref> EventStore::v1_tag_ref(const Oref& event) const {
  std::shared_lock lock(mu_);
  auto it = owners_.find(event);
  if (it == owners_.end()) return std::nullopt;
  auto c = collections_.find(it->second.collection);
  if (c == collections_.end() || it->second.index >= c->second.entries.size()) return std::nullopt;
  return c->second.entries[it->second.index].tag;
}

AccessMode EventStore::access(std::string_view path) const {
  std::shared_lock lock(mu_);
  std::size_t best_len = 0;
  AccessMode mode = AccessMode::kReadWrite;
  bool found = false;
  for (const auto& [rule, m] : access_rules_) {
    if (path_covers(rule, path) && (!found || rule.size() > best_len)) {
      best_len = rule.size();
      mode = m;
      found = true;
    }
  }
  return mode;
}

std::map<std::string, AccessMode> EventStore::access_rules() const {
  std::shared_lock lock(mu_);
  return {access_rules_.begin(), access_rules_.end()};
}

void EventStore::set_access_rule(const std::string& path, AccessMode mode) {
  if (path != "/") {
    try {
      validate_collection_name(path);
    } catch (const Error& e) {
      fail(ErrorCode::kUnknownPath, e.what());
    }
  }
  auto txn = begin();
  {
    std::unique_lock lock(mu_);
    bool exists = path == "/";
    for (const auto& [name, c] : collections_) {
      if (path_covers(path, name)) {
        exists = true;
        break;
      }
    }
    if (!exists) fail(ErrorCode::kUnknownPath, "no collection at or below '" + path + "'");
    access_rules_[path] = mode;
  }
  write_manifest();
  txn.abort();
}

std::uint64_t EventStore::record_count(RecordType type) const {
  std::shared_lock lock(mu_);
  auto it = record_counts_.find(type);
  return it == record_counts_.end() ? 0 : it->second;
}

std::uint64_t EventStore::event_count() const {
  return record_count(RecordType::kEventV1) + record_count(RecordType::kEventV2);
}

// ---------------------------------------------------------------------------
// WriteTxn

WriteTxn::WriteTxn(EventStore& store) : store_(&store) {}

WriteTxn::WriteTxn(WriteTxn&& other) noexcept
    : store_(std::exchange(other.store_, nullptr)),
      active_(other.active_),
      descriptor_refs_(std::move(other.descriptor_refs_)),
      common_refs_(std::move(other.common_refs_)),
      common_at_(std::move(other.common_at_)),
      common_ref_delta_(std::move(other.common_ref_delta_)),
      collections_(std::move(other.collections_)),
      owners_(std::move(other.owners_)),
      events_(std::move(other.events_)),
      v1_ids_(std::move(other.v1_ids_)),
      v2_ids_(std::move(other.v2_ids_)),
      record_counts_(std::move(other.record_counts_)) {
  for (const auto& d : other.descriptors_.all()) descriptors_.adopt(d);
  for (const auto& c : other.commons_.all()) commons_.adopt(c);
}

WriteTxn::~WriteTxn() {
  if (active()) {
    try {
      abort();
    } catch (...) {
    }
  }
}

void WriteTxn::require_active() const {
  if (!active()) fail(ErrorCode::kTransactionRequired, "no open write transaction");
}

EventStore& WriteTxn::store() const {
  require_active();
  return *store_;
}

Oref WriteTxn::put(RecordType type, std::span<const std::byte> payload) {
  require_active();
  auto ref = store_->segments_->append(type, payload);
  record_counts_[type] += 1;
  return ref;
}

StoredRecord WriteTxn::read(const Oref& ref) {
  require_active();
  return store_->segments_->read_own(ref);
}

DescriptorPtr WriteTxn::ensure_descriptor(const TagDescriptor& descriptor) {
  require_active();
  if (auto d = store_->descriptors_.find(descriptor.id())) {
    if (d->canonical() != descriptor.canonical()) {
      fail(ErrorCode::kHashCollision,
           "descriptor id " + std::to_string(descriptor.id()) + " already names a different attribute list");
    }
    return d;
  }
  if (auto d = descriptors_.find(descriptor.id())) {
    if (d->canonical() != descriptor.canonical()) {
      fail(ErrorCode::kHashCollision,
           "descriptor id " + std::to_string(descriptor.id()) + " already names a different attribute list");
    }
    return d;
  }
  auto d = descriptors_.adopt(std::make_shared<const TagDescriptor>(descriptor));
  descriptor_refs_[d->id()] = put(RecordType::kDescriptor, encode_descriptor(*d));
  return d;
}

DescriptorPtr WriteTxn::descriptor(std::uint64_t id) const {
  if (auto d = descriptors_.find(id)) return d;
  return store_->descriptors_.get(id);
}

DescriptorLookup WriteTxn::descriptor_lookup() const {
  return [this](std::uint64_t id) { return descriptor(id); };
}

std::pair<std::uint64_t, Oref> WriteTxn::intern_common(const StaticIdFragment& fragment, const PackedLayout& layout) {
  require_active();
  const auto id = fnv1a64(common_content_key(fragment, layout));
  const CommonObject candidate{fragment, layout, id, 0};
  if (auto existing = store_->commons_.find(id)) {
    if (!existing->same_content(candidate)) {
      fail(ErrorCode::kHashCollision, "common id " + std::to_string(id) + " already names different content");
    }
    std::shared_lock lock(store_->mu_);
    return {id, store_->common_refs_.at(id)};
  }
  if (commons_.adopt(candidate)) {
    const auto ref = put(RecordType::kCommon, encode_common(candidate));
    common_refs_[id] = ref;
    common_at_[ref] = id;
  }
  return {id, common_refs_.at(id)};
}

void WriteTxn::add_common_ref(std::uint64_t id) {
  require_active();
  common_ref_delta_[id] += 1;
}

CommonObject WriteTxn::common_at(const Oref& ref) {
  if (auto it = common_at_.find(ref); it != common_at_.end()) return commons_.get(it->second);
  if (auto id = store_->common_id_at(ref)) return store_->commons_.get(*id);
  fail(ErrorCode::kUnknownCommonObject, "no common object at " + to_string(ref));
}

Oref WriteTxn::put_tag(const Tag& tag) {
  ensure_descriptor(tag.descriptor());
  return put(RecordType::kTag, tag.encode());
}

void WriteTxn::claim_event_id(CollectionFormat format, const EventId& id) {
  require_active();
  auto key = event_id_key(id);
  const auto& committed = format == CollectionFormat::kV1 ? store_->v1_ids_ : store_->v2_ids_;
  auto& pending = format == CollectionFormat::kV1 ? v1_ids_ : v2_ids_;
  bool dup;
  {
    std::shared_lock lock(store_->mu_);
    dup = committed.count(key) != 0;
  }
  if (dup || !pending.insert(std::move(key)).second) {
    fail(ErrorCode::kDuplicateEventId, "event " + id.experiment_label + "/" + std::to_string(id.run_number) + "/" +
                                           std::to_string(id.config_key) + "/" + std::to_string(id.event_number) +
                                           " already stored in this format");
  }
}

void WriteTxn::note_event(const Oref& ref, CollectionFormat format) { events_[ref] = format; }

CollectionFormat WriteTxn::event_format(const Oref& ref) {
  require_active();
  if (auto it = events_.find(ref); it != events_.end()) return it->second;
  std::vector<std::byte> scratch;
  const auto [type, len] = store_->segments_->read_prefix(ref, 0, scratch);
  (void)len;
  if (type == RecordType::kEventV1) return CollectionFormat::kV1;
  if (type == RecordType::kEventV2) return CollectionFormat::kV2;
  fail(ErrorCode::kUnknownRef, to_string(ref) + " is not an event record");
}

Tag WriteTxn::event_tag(const Oref& ref) {
  const auto format = event_format(ref);
  if (format == CollectionFormat::kV2) {
    const auto ev = decode_event_v2(read(ref).payload);
    auto rec = read(ev.tag);
    if (rec.type != RecordType::kTag) fail(ErrorCode::kCorruptRecord, "event tag ref is not a tag record");
    return Tag::decode(rec.payload, descriptor_lookup());
  }
  auto owner = owner_of(ref);
  if (!owner) fail(ErrorCode::kCorruptRecord, "v1 event " + to_string(ref) + " has no owning collection");
  std::optional<Oref> tag_ref;
  if (auto it = collections_.find(owner->collection); it != collections_.end()) {
    const auto& pc = it->second;
    if (owner->index >= pc.committed_entries) return *pc.staged[owner->index - pc.committed_entries];
    tag_ref = pc.data.entries.at(owner->index).tag;
  } else {
    tag_ref = store_->v1_tag_ref(ref);
  }
  if (!tag_ref) fail(ErrorCode::kCorruptRecord, "v1 collection entry has no tag");
  auto rec = read(*tag_ref);
  return Tag::decode(rec.payload, descriptor_lookup());
}

bool WriteTxn::collection_exists(std::string_view name) const {
  if (collections_.count(name)) return true;
  return store_->find_collection(name).has_value();
}

WriteTxn::PendingCollection& WriteTxn::touch(std::string_view name) {
  require_active();
  if (auto it = collections_.find(name); it != collections_.end()) return it->second;
  auto c = store_->find_collection(name);
  if (!c) fail(ErrorCode::kUnknownCollection, "no collection named '" + std::string(name) + "'");
  PendingCollection pc;
  pc.committed_entries = c->entries.size();
  if (c->format == CollectionFormat::kV1 && c->union_descriptor) {
    auto u = store_->descriptor(*c->union_descriptor);
    pc.union_specs = u->specs();
    pc.merged.insert(u->id());
  }
  pc.data = std::move(*c);
  return collections_.emplace(std::string(name), std::move(pc)).first->second;
}

const Collection& WriteTxn::collection(std::string_view name) { return touch(name).data; }

void WriteTxn::create_collection(const std::string& name, CollectionFormat format) {
  require_active();
  validate_collection_name(name);
  if (collection_exists(name)) fail(ErrorCode::kNameExists, "collection '" + name + "' already exists");
  if (store_->access(name) == AccessMode::kReadOnly) {
    fail(ErrorCode::kAccessDenied, "namespace of '" + name + "' is read-only");
  }
  PendingCollection pc;
  pc.created = true;
  pc.data.name = name;
  pc.data.format = format;
  collections_.emplace(name, std::move(pc));
}

void WriteTxn::merge_union(PendingCollection& pc, const TagDescriptor& descriptor) {
  if (pc.merged.count(descriptor.id())) return;
  pc.union_specs = merge_attribute_lists(pc.union_specs, descriptor.specs());
  pc.merged.insert(descriptor.id());
}

void WriteTxn::check_union(std::string_view name, const TagDescriptor& descriptor) {
  auto& pc = touch(name);
  if (pc.data.format != CollectionFormat::kV1 || pc.merged.count(descriptor.id())) return;
  (void)merge_attribute_lists(pc.union_specs, descriptor.specs());
}

void WriteTxn::append_entry(std::string_view name, const Oref& event, bool owned) {
  auto& pc = touch(name);
  if (pc.data.format == CollectionFormat::kV1) {
    append_entry(name, event, owned, event_tag(event));
  } else {
    append_entry(name, event, owned, Tag());
  }
}

void WriteTxn::append_entry(std::string_view name, const Oref& event, bool owned, Tag tag) {
  auto& pc = touch(name);
  if (store_->access(name) == AccessMode::kReadOnly) {
    fail(ErrorCode::kAccessDenied, "collection '" + std::string(name) + "' is read-only");
  }
  (void)event_format(event);
  if (owned) {
    if (auto o = owner_of(event)) {
      fail(ErrorCode::kAlreadyOwned, "event " + to_string(event) + " is owned by " + o->collection);
    }
  }
  if (pc.data.format == CollectionFormat::kV1) {
    merge_union(pc, tag.descriptor());
    pc.staged.emplace_back(std::move(tag));
  }
  if (owned) owners_[event] = Owner{pc.data.name, pc.data.entries.size()};
  pc.data.entries.push_back(CollectionEntry{event, owned, std::nullopt});
}

std::optional<Owner> WriteTxn::owner_of(const Oref& event) const {
  if (auto it = owners_.find(event); it != owners_.end()) return it->second;
  return store_->owner_of(event);
}

void WriteTxn::finalize_collection(PendingCollection& pc) {
  auto& c = pc.data;
  if (c.format != CollectionFormat::kV1) return;
  if (c.entries.empty()) return;
  auto u = ensure_descriptor(TagDescriptor::build(pc.union_specs));
  const bool grown = !c.union_descriptor || *c.union_descriptor != u->id();
  if (grown) {
    for (std::size_t i = 0; i < pc.committed_entries; ++i) {
      auto& entry = c.entries[i];
      auto old = Tag::decode(read(entry.tag.value()).payload, descriptor_lookup());
      entry.tag = put(RecordType::kTag, old.widened_to(u).encode());
    }
  }
  for (std::size_t i = pc.committed_entries; i < c.entries.size(); ++i) {
    auto& staged = pc.staged[i - pc.committed_entries];
    c.entries[i].tag = put(RecordType::kTag, staged->widened_to(u).encode());
    staged.reset();
  }
  c.union_descriptor = u->id();
}

void WriteTxn::commit() {
  require_active();
  try {
    for (auto& [name, pc] : collections_) {
      finalize_collection(pc);
      put(RecordType::kCollection, encode_collection(pc.data));
    }
    store_->segments_->commit();
  } catch (const SimulatedCrash&) {
    reset();
    throw;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIoFailure) {
      reset();
      throw;
    }
    abort();
    throw;
  }

  auto& s = *store_;
  {
    std::unique_lock lock(s.mu_);
    for (const auto& d : descriptors_.all()) s.descriptors_.adopt(d);
    s.descriptor_refs_.insert(descriptor_refs_.begin(), descriptor_refs_.end());
    for (const auto& c : commons_.all()) s.commons_.adopt(c);
    s.common_refs_.insert(common_refs_.begin(), common_refs_.end());
    s.common_at_.insert(common_at_.begin(), common_at_.end());
    for (const auto& [id, n] : common_ref_delta_) s.commons_.add_refs(id, n);
    for (auto& [name, pc] : collections_) s.collections_[name] = std::move(pc.data);
    for (auto& [ref, owner] : owners_) s.owners_[ref] = std::move(owner);
    s.v1_ids_.insert(v1_ids_.begin(), v1_ids_.end());
    s.v2_ids_.insert(v2_ids_.begin(), v2_ids_.end());
    for (const auto& [type, n] : record_counts_) s.record_counts_[type] += n;
  }
  reset();
}

void WriteTxn::abort() {
  if (!active()) return;
  store_->segments_->abort();
  reset();
}

void WriteTxn::reset() {
  active_ = false;
  if (store_) store_->txn_open_ = false;
  collections_.clear();
  owners_.clear();
  events_.clear();
  v1_ids_.clear();
  v2_ids_.clear();
  record_counts_.clear();
  common_ref_delta_.clear();
}

}  // namespace evstore
