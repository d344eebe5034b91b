#pragma once

// Common objects: one interned bundle of the static event-ID fragment and the
// packed component layout, referenced by every event that shares them.

#include <cstdint>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evstore/bytes.hpp"
#include "evstore/core_model.hpp"
#include "evstore/tag.hpp"

namespace evstore {

struct CommonObject {
  StaticIdFragment static_fragment;
  PackedLayout layout;
  std::uint64_t common_id = 0;
  /// Events referencing this object. Bookkeeping only; never persisted.
  std::uint64_t ref_count = 0;

  bool same_content(const CommonObject& other) const {
    return static_fragment == other.static_fragment && layout == other.layout;
  }
};

/// Content bytes that the common id hashes over.
std::string common_content_key(const StaticIdFragment& fragment, const PackedLayout& layout);

/// u64 common_id, string label, u32 run, u32 config, string packed layout.
std::vector<std::byte> encode_common(const CommonObject& object);
CommonObject decode_common(std::span<const std::byte> bytes);

class CommonRegistry {
 public:
  explicit CommonRegistry(HashFunction hash = fnv1a64) : hash_(hash) {}

  CommonRegistry(const CommonRegistry&) = delete;
  CommonRegistry& operator=(const CommonRegistry&) = delete;

  /// Returns the id of the stored object with this content, creating it if
  /// needed. Throws HashCollision.
  std::uint64_t intern(const StaticIdFragment& fragment, const PackedLayout& layout);
  /// Inserts a decoded object. Returns false if an identical one is present.
  bool adopt(const CommonObject& object);

  std::optional<CommonObject> find(std::uint64_t id) const;
  /// Throws UnknownCommonObject.
  CommonObject get(std::uint64_t id) const;
  void add_refs(std::uint64_t id, std::uint64_t count);

  std::size_t size() const;
  std::vector<CommonObject> all() const;
  void clear();

 private:
  HashFunction hash_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::uint64_t, CommonObject> by_id_;
};

std::uint64_t common_intern(CommonRegistry& registry, const StaticIdFragment& fragment, const PackedLayout& layout);
CommonObject common_get(const CommonRegistry& registry, std::uint64_t id);

}  // namespace evstore
