#pragma once

// Append-only segment files with a journal-backed two-phase watermark commit.
//
// Every record is framed as: u8 type, u32 payload length, payload, u32 CRC32C
// of the payload (integers little-endian). Bytes past a segment's committed
// watermark are invisible to readers. A commit flushes and syncs segment data,
// journals the intended watermarks as "prepared", then journals "committed".
// Recovery rolls a prepared transaction forward when all of its records are
// intact and back otherwise, then truncates every segment to its watermark.
//
// Store directory: segments/NNNNNNNN.seg, journal.bin, LOCK (writer lease).

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "evstore/bytes.hpp"

namespace evstore {

enum class RecordType : std::uint8_t {
  kEventV1 = 1,
  kEventV2 = 2,
  kHeader = 3,
  kId = 4,
  kTag = 5,
  kCommon = 6,
  kDescriptor = 7,
  kData = 8,
  kCollection = 9,
};

inline constexpr std::array kAllRecordTypes = {
    RecordType::kEventV1, RecordType::kEventV2, RecordType::kHeader,     RecordType::kId,         RecordType::kTag,
    RecordType::kCommon,  RecordType::kDescriptor, RecordType::kData, RecordType::kCollection,
};

std::string_view record_type_name(RecordType type);
bool is_valid_record_type(std::uint8_t code);

/// Type byte + length + CRC.
inline constexpr std::size_t kRecordOverhead = 9;

/// Steps of the commit protocol at which a fault can be injected.
enum class CommitStep {
  kBeforeDataWrite,
  kTornDataWrite,
  kAfterDataWrite,
  kAfterDataSync,
  kTornPrepare,
  kAfterPrepareWrite,
  kAfterPrepareSync,
  kTornCommit,
  kAfterCommitWrite,
  kAfterCommitSync,
};

inline constexpr std::array kAllCommitSteps = {
    CommitStep::kBeforeDataWrite, CommitStep::kTornDataWrite,     CommitStep::kAfterDataWrite,
    CommitStep::kAfterDataSync,   CommitStep::kTornPrepare,       CommitStep::kAfterPrepareWrite,
    CommitStep::kAfterPrepareSync, CommitStep::kTornCommit,       CommitStep::kAfterCommitWrite,
    CommitStep::kAfterCommitSync,
};

std::string_view commit_step_name(CommitStep step);

/// True when a crash at `step` leaves a complete prepared entry behind, so
/// recovery must roll the transaction forward.
bool crash_step_is_durable(CommitStep step);

/// Thrown by an injected crash. The store that threw is unusable afterwards;
/// drop it and reopen the directory to run recovery.
class SimulatedCrash : public std::runtime_error {
 public:
  explicit SimulatedCrash(CommitStep step);
  CommitStep step() const { return step_; }

 private:
  CommitStep step_;
};

struct FaultPlan {
  enum class Kind { kCrash, kIoError };
  CommitStep step = CommitStep::kBeforeDataWrite;
  Kind kind = Kind::kCrash;
};

struct StoreOptions {
  std::uint64_t segment_roll_bytes = 64ull << 20;
  std::size_t write_buffer_bytes = 1u << 20;
  bool fsync = true;
  /// Applies to the next commit only.
  std::optional<FaultPlan> fault;
};

struct SegmentMark {
  std::uint32_t segment = 0;
  std::uint64_t watermark = 0;

  friend bool operator==(const SegmentMark&, const SegmentMark&) = default;
};

struct StoredRecord {
  RecordType type;
  std::vector<std::byte> payload;
};

struct ScannedRecord {
  Oref ref;
  RecordType type = RecordType::kData;
  std::uint32_t length = 0;
  /// Whole payload for requested types, otherwise up to `prefix_bytes`.
  std::span<const std::byte> payload;
  bool crc_checked = false;
  bool crc_ok = true;
};

struct ScanOptions {
  /// Bit (1 << type) set: deliver the full payload, CRC-checked.
  std::uint32_t full_payload_types = 0;
  std::size_t prefix_bytes = 0;
  /// Read and check every payload.
  bool verify_crc = false;
};

struct ScanProblem {
  Oref ref;
  std::string message;
};

struct RecoveryReport {
  enum class Outcome { kClean, kRolledForward, kRolledBack };
  Outcome outcome = Outcome::kClean;
  std::uint64_t truncated_bytes = 0;
  std::uint32_t removed_segments = 0;
  bool journal_tail_dropped = false;
};

class SegmentStore {
 public:
  static std::unique_ptr<SegmentStore> create(const std::filesystem::path& dir, StoreOptions options = {});
  /// Recovers to the last committed state when no writer holds the lease.
  static std::unique_ptr<SegmentStore> open(const std::filesystem::path& dir, StoreOptions options = {});

  ~SegmentStore();
  SegmentStore(const SegmentStore&) = delete;
  SegmentStore& operator=(const SegmentStore&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  StoreOptions& options() { return options_; }

  /// Acquires the writer lease and re-runs recovery. Returns true when the
  /// committed state differs from what this instance last saw.
  /// Throws WriterBusy.
  bool begin();
  bool in_txn() const { return in_txn_; }
  /// Throws TransactionRequired, IoFailure.
  Oref append(RecordType type, std::span<const std::byte> payload);
  /// Throws IoFailure (state stays pre-transaction) or SimulatedCrash.
  void commit();
  void abort();
  /// Like read(), but also sees records appended by the open transaction.
  StoredRecord read_own(const Oref& ref);

  /// Throws UnknownRef (not committed), CorruptRecord.
  StoredRecord read(const Oref& ref) const;
  /// Record type, full length and the first `n` payload bytes; no CRC check.
  std::pair<RecordType, std::uint32_t> read_prefix(const Oref& ref, std::size_t n, std::vector<std::byte>& out) const;

  /// Walks every committed record in (segment, offset) order. Framing damage
  /// ends the walk of that segment and is returned as a problem.
  std::vector<ScanProblem> scan(const ScanOptions& options,
                                const std::function<void(const ScannedRecord&)>& visit) const;

  std::vector<SegmentMark> watermarks() const;
  std::uint64_t committed_txn() const;
  const RecoveryReport& last_recovery() const { return recovery_; }
  std::filesystem::path segment_path(std::uint32_t segment) const;

 private:
  SegmentStore(std::filesystem::path dir, StoreOptions options);

  void load_journal(bool writer);
  void recover_locked();
  bool validate_range(std::uint32_t segment, std::uint64_t from, std::uint64_t to);
  void compact_journal();
  void append_journal_entry(std::uint8_t state, std::uint64_t txn, const std::vector<SegmentMark>& marks, bool torn);
  void fault_point(CommitStep step);
  void flush_buffer();
  void sync_touched();
  int segment_fd(std::uint32_t segment) const;
  int open_segment(std::uint32_t segment, bool create);
  void rollback_txn();
  void release_lease();
  void check_usable() const;
  StoredRecord read_bounded(const Oref& ref, std::uint64_t limit) const;

  std::filesystem::path dir_;
  StoreOptions options_;

  // Committed view, shared with readers.
  mutable std::shared_mutex mu_;
  std::map<std::uint32_t, std::uint64_t> committed_;
  std::uint64_t committed_txn_ = 0;
  mutable std::mutex fd_mu_;
  std::map<std::uint32_t, int> fds_;

  // Writer state.
  int lock_fd_ = -1;
  int journal_fd_ = -1;
  bool in_txn_ = false;
  bool crashed_ = false;
  std::map<std::uint32_t, std::uint64_t> cursor_;
  std::uint32_t active_segment_ = 0;
  std::vector<std::byte> buffer_;
  std::uint64_t buffer_offset_ = 0;
  std::uint64_t journal_size_ = 0;
  RecoveryReport recovery_;
};

}  // namespace evstore
