#include "evstore/common_store.hpp"

#include <mutex>

namespace evstore {

std::string common_content_key(const StaticIdFragment& fragment, const PackedLayout& layout) {
  ByteWriter w;
  w.put_string(fragment.experiment_label);
  w.put_u32(fragment.run_number);
  w.put_u32(fragment.config_key);
  w.put_string(layout.packed_form());
  const auto& b = w.bytes();
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<std::byte> encode_common(const CommonObject& object) {
  ByteWriter w;
  w.put_u64(object.common_id);
  w.put_string(object.static_fragment.experiment_label);
  w.put_u32(object.static_fragment.run_number);
  w.put_u32(object.static_fragment.config_key);
  w.put_string(object.layout.packed_form());
  return std::move(w).take();
}

CommonObject decode_common(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  CommonObject out;
  out.common_id = r.u64();
  out.static_fragment.experiment_label = r.string();
  out.static_fragment.run_number = r.u32();
  out.static_fragment.config_key = r.u32();
  const auto packed = r.string();
  r.expect_end();
  try {
    out.layout = layout_from_packed(packed);
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptRecord, std::string("common object layout: ") + e.what());
  }
  return out;
}

std::uint64_t CommonRegistry::intern(const StaticIdFragment& fragment, const PackedLayout& layout) {
  CommonObject candidate{fragment, layout, hash_(common_content_key(fragment, layout)), 0};
  adopt(candidate);
  return candidate.common_id;
}

bool CommonRegistry::adopt(const CommonObject& object) {
  std::unique_lock lock(mu_);
  auto [it, inserted] = by_id_.emplace(object.common_id, object);
  if (!inserted && !it->second.same_content(object)) {
    fail(ErrorCode::kHashCollision,
         "common id " + std::to_string(object.common_id) + " already names different content");
  }
  return inserted;
}

std::optional<CommonObject> CommonRegistry::find(std::uint64_t id) const {
  std::shared_lock lock(mu_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

CommonObject CommonRegistry::get(std::uint64_t id) const {
  auto found = find(id);
  if (!found) fail(ErrorCode::kUnknownCommonObject, "no common object with id " + std::to_string(id));
  return *found;
}

void CommonRegistry::add_refs(std::uint64_t id, std::uint64_t count) {
  std::unique_lock lock(mu_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) fail(ErrorCode::kUnknownCommonObject, "no common object with id " + std::to_string(id));
  it->second.ref_count += count;
}

void CommonRegistry::clear() {
  std::unique_lock lock(mu_);
  by_id_.clear();
}

std::size_t CommonRegistry::size() const {
  std::shared_lock lock(mu_);
  return by_id_.size();
}

std::vector<CommonObject> CommonRegistry::all() const {
  std::shared_lock lock(mu_);
  std::vector<CommonObject> out;
  out.reserve(by_id_.size());
  for (const auto& [id, obj] : by_id_) out.push_back(obj);
  return out;
}

std::uint64_t common_intern(CommonRegistry& registry, const StaticIdFragment& fragment, const PackedLayout& layout) {
  return registry.intern(fragment, layout);
}

CommonObject common_get(const CommonRegistry& registry, std::uint64_t id) { return registry.get(id); }

}  // namespace evstore
