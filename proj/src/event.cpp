#include "evstore/event.hpp"

namespace evstore {

PackedLayout TransientEvent::layout() const {
  std::vector<ComponentEntry> entries;
  entries.reserve(components.size());
  for (const auto& c : components) entries.push_back(c.entry);
  return pack_layout(std::move(entries));
}

std::string compare_events(const TransientEvent& a, const TransientEvent& b) {
  if (!(a.id == b.id)) return "event ids differ";
  if (a.components.size() != b.components.size()) {
    return "component counts differ: " + std::to_string(a.components.size()) + " vs " +
           std::to_string(b.components.size());
  }
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    if (!(a.components[i].entry == b.components[i].entry)) return "component " + std::to_string(i) + " key/type differs";
    if (a.components[i].payload != b.components[i].payload) return "component " + std::to_string(i) + " payload differs";
  }
  for (const auto& spec : a.tag.descriptor().specs()) {
    if (!b.tag.has(spec.name)) return "attribute '" + spec.name + "' missing";
    if (!same_value(a.tag.get(spec.name), b.tag.get(spec.name))) return "attribute '" + spec.name + "' differs";
  }
  for (const auto& spec : b.tag.descriptor().specs()) {
    if (a.tag.descriptor().find(spec.name)) continue;
    if (!same_value(b.tag.get(spec.name), zero_value(spec.kind))) {
      return "extra attribute '" + spec.name + "' is not zero";
    }
  }
  return {};
}

}  // namespace evstore
