#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "evstore/core_model.hpp"
#include "evstore/tag.hpp"

namespace evstore {

struct Component {
  ComponentEntry entry;
  std::vector<std::byte> payload;

  friend bool operator==(const Component&, const Component&) = default;
};

/// The in-memory event: an id, an ordered bag of typed keyed payloads, a tag.
struct TransientEvent {
  EventId id;
  std::vector<Component> components;
  Tag tag;

  PackedLayout layout() const;
};

/// Empty when `a` and `b` agree on id, ordered components, and every
/// persistent attribute of `a`'s tag; otherwise a description of the first
/// difference found. Attributes that only `b`'s tag carries must be zero.
std::string compare_events(const TransientEvent& a, const TransientEvent& b);

}  // namespace evstore
