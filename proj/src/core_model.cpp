#include "evstore/core_model.hpp"

#include <set>

#include "evstore/error.hpp"

namespace evstore {

std::pair<StaticIdFragment, DynamicIdFragment> split_event_id(const EventId& id) {
  return {StaticIdFragment{id.experiment_label, id.run_number, id.config_key},
          DynamicIdFragment{id.event_number, id.timestamp_us}};
}

EventId join_event_id(const StaticIdFragment& s, const DynamicIdFragment& d) {
  return EventId{s.experiment_label, s.run_number, s.config_key, d.event_number, d.timestamp_us};
}

bool is_valid_name(std::string_view name) {
  return !name.empty() && name.size() <= kMaxNameBytes && name.find_first_of(";=") == std::string_view::npos;
}

void validate_name(std::string_view name, std::string_view what) {
  if (name.empty()) fail(ErrorCode::kInvalidName, std::string(what) + " must not be empty");
  if (name.size() > kMaxNameBytes) {
    fail(ErrorCode::kInvalidName, std::string(what) + " exceeds 255 bytes");
  }
  if (name.find_first_of(";=") != std::string_view::npos) {
    fail(ErrorCode::kIllegalCharacter, std::string(what) + " '" + std::string(name) + "' contains ';' or '='");
  }
}

PackedLayout pack_layout(std::vector<ComponentEntry> entries) {
  std::set<std::pair<std::string_view, std::string_view>> seen;
  std::size_t total = 0;
  for (const auto& e : entries) {
    validate_name(e.key, "component key");
    validate_name(e.type_name, "component type");
    if (!seen.emplace(e.key, e.type_name).second) {
      fail(ErrorCode::kDuplicateEntry, "duplicate component " + e.key + "=" + e.type_name);
    }
    total += e.key.size() + e.type_name.size() + 2;
  }

  PackedLayout layout;
  layout.packed_.reserve(total);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) layout.packed_ += ';';
    layout.packed_ += entries[i].key;
    layout.packed_ += '=';
    layout.packed_ += entries[i].type_name;
  }
  layout.entries_ = std::move(entries);
  return layout;
}

std::vector<ComponentEntry> parse_layout(std::string_view packed) {
  std::vector<ComponentEntry> out;
  if (packed.empty()) return out;

  std::set<std::pair<std::string_view, std::string_view>> seen;
  std::size_t pos = 0;
  while (true) {
    const auto end = std::min(packed.find(';', pos), packed.size());
    const auto item = packed.substr(pos, end - pos);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kMalformedLayout, "entry at byte " + std::to_string(pos) + " has no '='");
    }
    const auto key = item.substr(0, eq);
    const auto type = item.substr(eq + 1);
    if (!is_valid_name(key) || !is_valid_name(type)) {
      fail(ErrorCode::kMalformedLayout, "invalid key or type at byte " + std::to_string(pos));
    }
    if (!seen.emplace(key, type).second) {
      fail(ErrorCode::kMalformedLayout, "duplicate entry " + std::string(item));
    }
    out.push_back(ComponentEntry{std::string(key), std::string(type)});
    if (end == packed.size()) break;
    pos = end + 1;
  }
  return out;
}

PackedLayout layout_from_packed(std::string_view packed) { return pack_layout(parse_layout(packed)); }

}  // namespace evstore
