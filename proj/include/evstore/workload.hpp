#pragma once

// Synthetic event workloads.
//
// Spec files are key=value lines ('#' starts a comment):
//
//   event_count=100000
//   components_per_event=10
//   key_len=8
//   type_len=8
//   payload_len=256
//   bool_attrs=20
//   int_attrs=400
//   float_attrs=80
//   static_change_period=1000     # or "inf"
//   descriptor_pool=4
//   seed=42
//   experiment_label=BaBar        # optional
//   config_key=1                  # optional

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "evstore/event.hpp"
#include "evstore/tag.hpp"

namespace evstore {

struct WorkloadSpec {
  std::uint64_t event_count = 1000;
  std::uint32_t components_per_event = 10;
  std::uint32_t key_len = 8;
  std::uint32_t type_len = 8;
  std::uint32_t payload_len = 256;
  std::uint32_t bool_attrs = 2;
  std::uint32_t int_attrs = 4;
  std::uint32_t float_attrs = 2;
  /// Events per static-fragment change; empty means never.
  std::optional<std::uint64_t> static_change_period = 1000;
  std::uint32_t descriptor_pool = 1;
  std::uint64_t seed = 42;
  std::string experiment_label = "BaBar";
  std::uint32_t config_key = 1;

  /// Throws BadSpec.
  void validate() const;
  std::uint64_t distinct_static_fragments() const;

  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

/// Throws BadSpec.
WorkloadSpec parse_workload_spec(std::string_view text);
/// Throws BadSpec (also when the file cannot be read).
WorkloadSpec load_workload_spec(const std::filesystem::path& path);
std::string format_workload_spec(const WorkloadSpec& spec);

/// 100 000 events, 10 x 256-byte components, 20 bool + 400 int + 80 float
/// attributes, static fragment changing every 1000 events, 4 descriptors.
WorkloadSpec w0_spec();

/// Attribute list of pool descriptor `d`: bools, then ints, then floats,
/// named "d<d>.b<k>", "d<d>.i<k>", "d<d>.f<k>".
std::vector<AttributeSpec> pool_attributes(const WorkloadSpec& spec, std::uint32_t d);

/// Component key / type name of position `j`, padded to the spec's lengths.
std::string component_key(const WorkloadSpec& spec, std::uint32_t j);
std::string component_type(const WorkloadSpec& spec, std::uint32_t j);

/// Deterministic event stream for a spec.
class WorkloadGenerator {
 public:
  /// Throws BadSpec.
  explicit WorkloadGenerator(const WorkloadSpec& spec);

  bool done() const { return next_ >= spec_.event_count; }
  std::uint64_t produced() const { return next_; }
  TransientEvent next();

  const WorkloadSpec& spec() const { return spec_; }
  const std::vector<DescriptorPtr>& pool() const { return pool_; }

 private:
  WorkloadSpec spec_;
  std::mt19937_64 rng_;
  std::vector<DescriptorPtr> pool_;
  std::vector<ComponentEntry> entries_;
  std::uint64_t next_ = 0;
};

std::vector<TransientEvent> generate_workload(const WorkloadSpec& spec);

}  // namespace evstore
