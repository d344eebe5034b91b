#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evstore {

/// Identity of one recorded event.
struct EventId {
  std::string experiment_label;
  std::uint32_t run_number = 0;
  std::uint32_t config_key = 0;
  std::uint64_t event_number = 0;
  std::uint64_t timestamp_us = 0;

  friend bool operator==(const EventId&, const EventId&) = default;
};

/// Slowly-changing part of an EventId. Shared through common objects.
struct StaticIdFragment {
  std::string experiment_label;
  std::uint32_t run_number = 0;
  std::uint32_t config_key = 0;

  friend bool operator==(const StaticIdFragment&, const StaticIdFragment&) = default;
  friend auto operator<=>(const StaticIdFragment&, const StaticIdFragment&) = default;
};

/// Per-event part of an EventId. Always stored inline.
struct DynamicIdFragment {
  std::uint64_t event_number = 0;
  std::uint64_t timestamp_us = 0;

  friend bool operator==(const DynamicIdFragment&, const DynamicIdFragment&) = default;
};

std::pair<StaticIdFragment, DynamicIdFragment> split_event_id(const EventId& id);
EventId join_event_id(const StaticIdFragment& s, const DynamicIdFragment& d);

inline constexpr std::size_t kMaxNameBytes = 255;

/// Validates a key / type / attribute name: non-empty, at most 255 bytes,
/// no ';' or '='. Throws InvalidName or IllegalCharacter.
void validate_name(std::string_view name, std::string_view what);
bool is_valid_name(std::string_view name);

struct ComponentEntry {
  std::string key;
  std::string type_name;

  friend bool operator==(const ComponentEntry&, const ComponentEntry&) = default;
  friend auto operator<=>(const ComponentEntry&, const ComponentEntry&) = default;
};

/// Ordered component layout and its canonical "key=type;key=type" form.
class PackedLayout {
 public:
  PackedLayout() = default;

  const std::vector<ComponentEntry>& entries() const { return entries_; }
  const std::string& packed_form() const { return packed_; }
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const PackedLayout& a, const PackedLayout& b) { return a.packed_ == b.packed_; }

 private:
  friend PackedLayout pack_layout(std::vector<ComponentEntry> entries);
  friend PackedLayout layout_from_packed(std::string_view packed);

  std::vector<ComponentEntry> entries_;
  std::string packed_;
};

/// Throws DuplicateEntry, IllegalCharacter or InvalidName.
PackedLayout pack_layout(std::vector<ComponentEntry> entries);

/// Throws MalformedLayout.
std::vector<ComponentEntry> parse_layout(std::string_view packed);

/// parse_layout followed by pack_layout; the result's packed_form equals the input.
PackedLayout layout_from_packed(std::string_view packed);

}  // namespace evstore
