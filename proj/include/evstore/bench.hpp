#pragma once

// Head-to-head footprint comparison of the two event layouts.
//
// run_comparison ingests one workload into <dir>/v1 (assemble_v1, one
// collection) and <dir>/v2 (assemble_v2, one owning collection). Figures are
// accounted twice: live, from the transient events and the byte model, and
// cold, from nav_footprint over a fresh scan of both stores.
//
// nav_bytes_total = sum of per-event direct bytes + each distinct shared
// object (common object or union descriptor) once.

#include <cstdint>
#include <filesystem>
#include <string>

#include "evstore/byte_model.hpp"
#include "evstore/workload.hpp"

namespace evstore {

inline constexpr const char* kBenchV1Collection = "/bench/v1";
inline constexpr const char* kBenchV2Collection = "/bench/v2";

struct VersionReport {
  std::uint64_t events = 0;
  std::uint64_t nav_bytes_total = 0;
  double nav_bytes_per_event = 0;
  /// Persistent objects, collection records excluded.
  std::uint64_t object_count = 0;
  std::uint64_t distinct_descriptors = 0;
  std::uint64_t distinct_commons = 0;

  friend bool operator==(const VersionReport&, const VersionReport&) = default;
};

struct FootprintReport {
  ModelConstants model;
  VersionReport v1;
  VersionReport v2;
  /// 1 - v2/v1 on navigation bytes per event.
  double reduction_ratio = 0;

  friend bool operator==(const FootprintReport&, const FootprintReport&) = default;
};

struct BenchOptions {
  std::uint64_t batch_events = 10000;
  bool fsync = true;
  ModelConstants model;
};

struct BenchResult {
  WorkloadSpec spec;
  FootprintReport live;
  FootprintReport cold;
  double ingest_seconds_v1 = 0;
  double ingest_seconds_v2 = 0;
  double scan_seconds = 0;

  bool consistent() const { return live == cold; }
};

/// Throws StoreExists when either store directory already holds a store.
BenchResult run_comparison(const WorkloadSpec& spec, const std::filesystem::path& dir,
                           const BenchOptions& options = {});

/// Cold accounting of the stores at <dir>/v1 and <dir>/v2.
FootprintReport scan_comparison(const std::filesystem::path& dir);

double reduction_ratio(const VersionReport& v1, const VersionReport& v2);

/// key=value lines; no timings, so output is deterministic.
std::string format_report_text(const BenchResult& r);
/// Includes timings.
std::string format_report_json(const BenchResult& r);
std::string format_report_csv(const BenchResult& r);

}  // namespace evstore
