#pragma once

// The event store: a segment store plus in-memory catalogs (descriptors,
// common objects, collections, ownership, event ids) rebuilt by a scan on
// open. All mutation happens through a WriteTxn.
//
// Store directory: MANIFEST (format version, model constants, segment roll,
// access rules) next to the segment store's files.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "evstore/byte_model.hpp"
#include "evstore/common_store.hpp"
#include "evstore/records.hpp"
#include "evstore/storage.hpp"
#include "evstore/tag.hpp"

namespace evstore {

enum class AccessMode { kReadOnly, kReadWrite };

std::string_view access_mode_name(AccessMode mode);
/// "read-only" or "read-write". Throws InvalidArgument.
AccessMode parse_access_mode(std::string_view text);

struct StoreConfig {
  ModelConstants model;
  std::uint64_t segment_roll_bytes = 64ull << 20;
};

inline constexpr int kFormatVersion = 1;

struct Owner {
  std::string collection;
  std::size_t index = 0;
};

class WriteTxn;

class EventStore {
 public:
  /// Throws StoreExists.
  static std::unique_ptr<EventStore> create(const std::filesystem::path& dir, const StoreConfig& config = {},
                                            StoreOptions options = {});
  /// Throws NotAStore, CorruptJournal, CorruptRecord.
  static std::unique_ptr<EventStore> open(const std::filesystem::path& dir, StoreOptions options = {});

  ~EventStore();
  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  const StoreConfig& config() const { return config_; }
  const ModelConstants& model() const { return config_.model; }
  SegmentStore& segments() { return *segments_; }
  const SegmentStore& segments() const { return *segments_; }

  /// Throws WriterBusy.
  WriteTxn begin();

  StoredRecord read(const Oref& ref) const { return segments_->read(ref); }
  /// Decodes the tag record at `ref`.
  Tag read_tag(const Oref& ref) const;

  /// Throws UnknownDescriptor.
  DescriptorPtr descriptor(std::uint64_t id) const;
  DescriptorPtr find_descriptor(std::uint64_t id) const;
  DescriptorLookup descriptor_lookup() const;
  std::size_t descriptor_count() const;
  std::vector<DescriptorPtr> descriptors() const;

  /// Throws UnknownCommonObject.
  CommonObject common(std::uint64_t id) const;
  /// Id of the common object stored at `ref`.
  std::optional<std::uint64_t> common_id_at(const Oref& ref) const;
  std::size_t common_count() const;
  std::vector<CommonObject> commons() const;

  std::optional<Collection> find_collection(std::string_view name) const;
  /// Throws UnknownCollection.
  Collection collection(std::string_view name) const;
  /// Sorted.
  std::vector<std::string> collection_names() const;
  /// Entry count. Throws UnknownCollection.
  std::size_t collection_size(std::string_view name) const;
  std::optional<Owner> owner_of(const Oref& event) const;
  /// Collection-resident tag of a committed v1 event.
  std::optional<Oref> v1_tag_ref(const Oref& event) const;

  /// Most specific rule covering `path`; read-write when none does.
  AccessMode access(std::string_view path) const;
  std::map<std::string, AccessMode> access_rules() const;
  /// Persists the rule in MANIFEST. Throws WriterBusy.
  void set_access_rule(const std::string& path, AccessMode mode);

  /// Committed records of `type`, including superseded collection versions.
  std::uint64_t record_count(RecordType type) const;
  std::uint64_t event_count() const;

 private:
  friend class WriteTxn;

  EventStore(std::filesystem::path dir, StoreConfig config, std::unique_ptr<SegmentStore> segments);

  void load_catalog();
  void load_manifest();
  void write_manifest() const;
  void rebuild_owners();

  std::filesystem::path dir_;
  StoreConfig config_;
  std::unique_ptr<SegmentStore> segments_;
  bool txn_open_ = false;

  mutable std::shared_mutex mu_;
  DescriptorRegistry descriptors_;
  std::unordered_map<std::uint64_t, Oref> descriptor_refs_;
  CommonRegistry commons_;
  std::unordered_map<std::uint64_t, Oref> common_refs_;
  std::unordered_map<Oref, std::uint64_t, OrefHash> common_at_;
  std::map<std::string, Collection, std::less<>> collections_;
  std::unordered_map<Oref, Owner, OrefHash> owners_;
  std::unordered_set<std::string> v1_ids_;
  std::unordered_set<std::string> v2_ids_;
  std::map<RecordType, std::uint64_t> record_counts_;
  std::map<std::string, AccessMode, std::less<>> access_rules_;
};

/// The single open write transaction of a store. Destroying an active
/// transaction aborts it.
class WriteTxn {
 public:
  WriteTxn(WriteTxn&& other) noexcept;
  WriteTxn& operator=(WriteTxn&&) = delete;
  ~WriteTxn();

  bool active() const { return store_ != nullptr && active_; }
  /// Throws TransactionRequired.
  EventStore& store() const;

  Oref put(RecordType type, std::span<const std::byte> payload);
  /// Committed or written by this transaction.
  StoredRecord read(const Oref& ref);

  /// Persists the descriptor unless already stored. Throws HashCollision.
  DescriptorPtr ensure_descriptor(const TagDescriptor& descriptor);
  /// Pending or committed. Throws UnknownDescriptor.
  DescriptorPtr descriptor(std::uint64_t id) const;
  DescriptorLookup descriptor_lookup() const;

  /// Persists the common object unless already stored; returns its id and location.
  std::pair<std::uint64_t, Oref> intern_common(const StaticIdFragment& fragment, const PackedLayout& layout);
  void add_common_ref(std::uint64_t id);
  /// Pending or committed. Throws UnknownCommonObject.
  CommonObject common_at(const Oref& ref);

  /// Ensures the descriptor and writes the tag record.
  Oref put_tag(const Tag& tag);

  /// Throws DuplicateEventId.
  void claim_event_id(CollectionFormat format, const EventId& id);
  void note_event(const Oref& ref, CollectionFormat format);
  /// Format of the event at `ref`. Throws UnknownRef when `ref` is no event.
  CollectionFormat event_format(const Oref& ref);
  /// Tag of any committed or pending event.
  Tag event_tag(const Oref& ref);

  bool collection_exists(std::string_view name) const;
  /// Pending view. Throws UnknownCollection.
  const Collection& collection(std::string_view name);
  /// Throws BadName, NameExists, AccessDenied.
  void create_collection(const std::string& name, CollectionFormat format);
  /// For v1 collections the entry's tag is staged and written at commit,
  /// laid out against the collection's final union descriptor.
  /// Throws UnknownCollection, AccessDenied, AlreadyOwned, KindConflict.
  void append_entry(std::string_view name, const Oref& event, bool owned);
  /// Same, with the staged tag supplied by the caller (v1 collections).
  void append_entry(std::string_view name, const Oref& event, bool owned, Tag tag);
  /// Throws KindConflict when `descriptor` cannot join the union of v1 collection `name`.
  void check_union(std::string_view name, const TagDescriptor& descriptor);
  std::optional<Owner> owner_of(const Oref& event) const;

  /// Throws IoFailure (transaction rolled back) or SimulatedCrash.
  void commit();
  void abort();

 private:
  friend class EventStore;
  explicit WriteTxn(EventStore& store);

  struct PendingCollection {
    Collection data;
    bool created = false;
    std::size_t committed_entries = 0;
    std::vector<std::optional<Tag>> staged;
    std::vector<AttributeSpec> union_specs;
    std::unordered_set<std::uint64_t> merged;
  };

  PendingCollection& touch(std::string_view name);
  void require_active() const;
  void merge_union(PendingCollection& pc, const TagDescriptor& descriptor);
  void finalize_collection(PendingCollection& pc);
  void reset();

  EventStore* store_;
  bool active_ = true;

  DescriptorRegistry descriptors_;
  std::unordered_map<std::uint64_t, Oref> descriptor_refs_;
  CommonRegistry commons_;
  std::unordered_map<std::uint64_t, Oref> common_refs_;
  std::unordered_map<Oref, std::uint64_t, OrefHash> common_at_;
  std::unordered_map<std::uint64_t, std::uint64_t> common_ref_delta_;
  std::map<std::string, PendingCollection, std::less<>> collections_;
  std::unordered_map<Oref, Owner, OrefHash> owners_;
  std::unordered_map<Oref, CollectionFormat, OrefHash> events_;
  std::unordered_set<std::string> v1_ids_;
  std::unordered_set<std::string> v2_ids_;
  std::map<RecordType, std::uint64_t> record_counts_;
};

/// Validates a collection path: absolute, '/'-separated, non-empty
/// components of [A-Za-z0-9._-]. Throws BadName.
void validate_collection_name(std::string_view name);

}  // namespace evstore
