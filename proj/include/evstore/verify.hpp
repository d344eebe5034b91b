#pragma once

// Full-scan store checker. Works from the raw segments alone (it does not
// use the EventStore catalogs) and reports failures instead of throwing.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "evstore/bytes.hpp"

namespace evstore {

struct VerifyCheck {
  std::string name;
  bool passed = true;
  std::uint64_t failure_count = 0;
  /// First few failures, each prefixed by the offending Oref.
  std::vector<std::string> failures;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  std::map<std::string, std::uint64_t> record_counts;
  std::uint64_t descriptors = 0;
  /// Distinct descriptors used as the union of a current v1 collection.
  std::uint64_t union_descriptors = 0;
  std::uint64_t commons = 0;
  std::uint64_t events_v1 = 0;
  std::uint64_t events_v2 = 0;
  std::uint64_t collections = 0;
  /// Records whose checksum does not match.
  std::vector<Oref> bad_crc;

  bool ok() const;
  const VerifyCheck* check(std::string_view name) const;
};

/// Checks: open, framing, crc, decode, references, union_layout,
/// object_count_law, no_orphans, ownership, descriptor_interning,
/// common_interning, event_id_uniqueness.
VerifyReport verify_store(const std::filesystem::path& dir);

std::string format_verify_report(const VerifyReport& report);

}  // namespace evstore
