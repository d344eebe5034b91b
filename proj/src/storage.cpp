#include "evstore/storage.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <set>

#include "evstore/error.hpp"

namespace evstore {

namespace fs = std::filesystem;

namespace {

constexpr char kJournalMagic[4] = {'E', 'V', 'J', '1'};
constexpr std::uint32_t kJournalVersion = 1;
constexpr std::size_t kJournalHeaderBytes = 8;
constexpr std::uint32_t kMaxJournalBody = 1u << 24;
constexpr std::uint64_t kCompactJournalBytes = 256u << 10;
constexpr std::size_t kScanChunk = 4u << 20;

constexpr std::uint8_t kPrepared = 1;
constexpr std::uint8_t kCommitted = 2;
constexpr std::uint8_t kAborted = 3;

[[noreturn]] void io_fail(const std::string& what) {
  fail(ErrorCode::kIoFailure, what + ": " + std::strerror(errno));
}

void write_all(int fd, const void* data, std::size_t n, std::uint64_t offset) {
  const auto* p = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t w = ::pwrite(fd, p, n, static_cast<off_t>(offset));
    if (w < 0) {
      if (errno == EINTR) continue;
      io_fail("pwrite");
    }
    p += w;
    n -= static_cast<std::size_t>(w);
    offset += static_cast<std::uint64_t>(w);
  }
}

/// Reads up to n bytes; returns the count actually read.
std::size_t read_upto(int fd, void* data, std::size_t n, std::uint64_t offset) {
  auto* p = static_cast<char*>(data);
  std::size_t total = 0;
  while (total < n) {
    const ssize_t r = ::pread(fd, p + total, n - total, static_cast<off_t>(offset + total));
    if (r < 0) {
      if (errno == EINTR) continue;
      io_fail("pread");
    }
    if (r == 0) break;
    total += static_cast<std::size_t>(r);
  }
  return total;
}

void sync_fd(int fd, const char* what) {
  if (::fsync(fd) != 0) io_fail(std::string("fsync ") + what);
}

void sync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) io_fail("open directory " + dir.string());
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) io_fail("fsync directory " + dir.string());
}

std::uint64_t file_size(int fd) {
  struct stat st;
  if (::fstat(fd, &st) != 0) io_fail("fstat");
  return static_cast<std::uint64_t>(st.st_size);
}

struct JournalEntry {
  std::uint8_t state = 0;
  std::uint64_t txn = 0;
  std::vector<SegmentMark> marks;
};

std::vector<std::byte> encode_journal_entry(std::uint8_t state, std::uint64_t txn,
                                            const std::vector<SegmentMark>& marks) {
  ByteWriter body;
  body.put_u8(state);
  body.put_u64(txn);
  body.put_u32(static_cast<std::uint32_t>(marks.size()));
  for (const auto& m : marks) {
    body.put_u32(m.segment);
    body.put_u64(m.watermark);
  }
  ByteWriter out;
  out.put_u32(static_cast<std::uint32_t>(body.size()));
  out.put_bytes(body.bytes());
  out.put_u32(crc32c(body.bytes()));
  return std::move(out).take();
}

std::vector<std::byte> journal_header() {
  ByteWriter w;
  w.put_bytes(as_bytes(std::string_view(kJournalMagic, 4)));
  w.put_u32(kJournalVersion);
  return std::move(w).take();
}

struct ParsedJournal {
  std::vector<JournalEntry> entries;
  std::uint64_t valid_end = 0;
  std::uint64_t file_size = 0;
};

ParsedJournal parse_journal(int fd) {
  ParsedJournal out;
  out.file_size = file_size(fd);
  std::vector<std::byte> bytes(out.file_size);
  if (read_upto(fd, bytes.data(), bytes.size(), 0) != bytes.size()) {
    fail(ErrorCode::kCorruptJournal, "short read of journal");
  }
  if (bytes.size() < kJournalHeaderBytes || std::memcmp(bytes.data(), kJournalMagic, 4) != 0) {
    fail(ErrorCode::kCorruptJournal, "journal header missing or damaged");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kJournalVersion) fail(ErrorCode::kCorruptJournal, "unsupported journal version");

  std::size_t pos = kJournalHeaderBytes;
  out.valid_end = pos;
  while (pos + 4 <= bytes.size()) {
    std::uint32_t body_len;
    std::memcpy(&body_len, bytes.data() + pos, 4);
    if (body_len > kMaxJournalBody || pos + 4 + body_len + 4 > bytes.size()) break;
    std::span<const std::byte> body(bytes.data() + pos + 4, body_len);
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + pos + 4 + body_len, 4);
    if (crc32c(body) != stored_crc) break;
    try {
      ByteReader r(body);
      JournalEntry e;
      e.state = r.u8();
      e.txn = r.u64();
      const auto n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        SegmentMark m;
        m.segment = r.u32();
        m.watermark = r.u64();
        e.marks.push_back(m);
      }
      r.expect_end();
      if (e.state < kPrepared || e.state > kAborted) break;
      out.entries.push_back(std::move(e));
    } catch (const Error&) {
      break;
    }
    pos += 4 + body_len + 4;
    out.valid_end = pos;
  }
  return out;
}

struct ResolvedJournal {
  JournalEntry committed;
  std::optional<JournalEntry> pending;
};

ResolvedJournal resolve_journal(const ParsedJournal& parsed) {
  std::optional<JournalEntry> committed;
  std::optional<JournalEntry> pending;
  for (const auto& e : parsed.entries) {
    if (e.state == kPrepared) {
      pending = e;
    } else if (e.state == kCommitted) {
      committed = e;
      if (pending && pending->txn <= e.txn) pending.reset();
    } else if (pending && pending->txn == e.txn) {
      pending.reset();
    }
  }
  if (!committed) fail(ErrorCode::kCorruptJournal, "journal holds no committed state");
  return {std::move(*committed), std::move(pending)};
}

/// Buffered positional reader used by scans.
class ChunkReader {
 public:
  ChunkReader(int fd, std::uint64_t limit) : fd_(fd), limit_(limit) {}

  bool fetch(std::uint64_t off, std::size_t n, std::span<const std::byte>& out) {
    if (off < start_ || off + n > start_ + len_) {
      if (off + n > limit_) return false;
      const std::size_t want =
          static_cast<std::size_t>(std::min<std::uint64_t>(std::max(n, kScanChunk), limit_ - off));
      buf_.resize(want);
      start_ = off;
      len_ = read_upto(fd_, buf_.data(), want, off);
      if (len_ < n) return false;
    }
    out = std::span<const std::byte>(buf_.data() + (off - start_), n);
    return true;
  }

 private:
  int fd_;
  std::uint64_t limit_;
  std::vector<std::byte> buf_;
  std::uint64_t start_ = 0;
  std::size_t len_ = 0;
};

/// Walks [from, to) of one segment. Returns the first framing problem, if any.
std::optional<ScanProblem> walk_segment(int fd, std::uint32_t segment, std::uint64_t from, std::uint64_t to,
                                        const ScanOptions& options,
                                        const std::function<void(const ScannedRecord&)>& visit) {
  ChunkReader reader(fd, to);
  std::uint64_t off = from;
  while (off < to) {
    const Oref ref{segment, off};
    std::span<const std::byte> view;
    if (to - off < kRecordOverhead || !reader.fetch(off, 5, view)) {
      return ScanProblem{ref, "truncated record header"};
    }
    const auto code = static_cast<std::uint8_t>(view[0]);
    std::uint32_t len;
    std::memcpy(&len, view.data() + 1, 4);
    if (!is_valid_record_type(code)) return ScanProblem{ref, "invalid record type " + std::to_string(code)};
    const std::uint64_t end = off + kRecordOverhead + len;
    if (end > to) return ScanProblem{ref, "record extends past watermark"};

    ScannedRecord rec;
    rec.ref = ref;
    rec.type = static_cast<RecordType>(code);
    rec.length = len;
    const bool full = options.verify_crc || (options.full_payload_types & (1u << code)) != 0;
    if (full) {
      if (!reader.fetch(off + 5, std::size_t{len} + 4, view)) return ScanProblem{ref, "segment shorter than watermark"};
      rec.payload = view.first(len);
      std::uint32_t stored;
      std::memcpy(&stored, view.data() + len, 4);
      rec.crc_checked = true;
      rec.crc_ok = crc32c(rec.payload) == stored;
    } else if (options.prefix_bytes > 0 && len > 0) {
      const std::size_t n = std::min<std::size_t>(options.prefix_bytes, len);
      if (!reader.fetch(off + 5, n, view)) return ScanProblem{ref, "segment shorter than watermark"};
      rec.payload = view;
    }
    visit(rec);
    off = end;
  }
  return std::nullopt;
}

std::vector<SegmentMark> to_marks(const std::map<std::uint32_t, std::uint64_t>& m) {
  std::vector<SegmentMark> out;
  out.reserve(m.size());
  for (const auto& [seg, wm] : m) out.push_back({seg, wm});
  return out;
}

}  // namespace

std::string_view record_type_name(RecordType type) {
  switch (type) {
    case RecordType::kEventV1: return "event_v1";
    case RecordType::kEventV2: return "event_v2";
    case RecordType::kHeader: return "header";
    case RecordType::kId: return "id";
    case RecordType::kTag: return "tag";
    case RecordType::kCommon: return "common";
    case RecordType::kDescriptor: return "descriptor";
    case RecordType::kData: return "data";
    case RecordType::kCollection: return "collection";
  }
  return "unknown";
}

bool is_valid_record_type(std::uint8_t code) { return code >= 1 && code <= 9; }

std::string_view commit_step_name(CommitStep step) {
  switch (step) {
    case CommitStep::kBeforeDataWrite: return "before_data_write";
    case CommitStep::kTornDataWrite: return "torn_data_write";
    case CommitStep::kAfterDataWrite: return "after_data_write";
    case CommitStep::kAfterDataSync: return "after_data_sync";
    case CommitStep::kTornPrepare: return "torn_prepare";
    case CommitStep::kAfterPrepareWrite: return "after_prepare_write";
    case CommitStep::kAfterPrepareSync: return "after_prepare_sync";
    case CommitStep::kTornCommit: return "torn_commit";
    case CommitStep::kAfterCommitWrite: return "after_commit_write";
    case CommitStep::kAfterCommitSync: return "after_commit_sync";
  }
  return "unknown";
}

bool crash_step_is_durable(CommitStep step) {
  switch (step) {
    case CommitStep::kBeforeDataWrite:
    case CommitStep::kTornDataWrite:
    case CommitStep::kAfterDataWrite:
    case CommitStep::kAfterDataSync:
    case CommitStep::kTornPrepare:
      return false;
    default:
      return true;
  }
}

SimulatedCrash::SimulatedCrash(CommitStep step)
    : std::runtime_error("simulated crash at " + std::string(commit_step_name(step))), step_(step) {}

SegmentStore::SegmentStore(fs::path dir, StoreOptions options) : dir_(std::move(dir)), options_(std::move(options)) {}

SegmentStore::~SegmentStore() {
  if (in_txn_ && !crashed_) {
    try {
      abort();
    } catch (...) {
    }
  }
  for (auto& [seg, fd] : fds_) ::close(fd);
  if (journal_fd_ >= 0) ::close(journal_fd_);
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

fs::path SegmentStore::segment_path(std::uint32_t segment) const {
  char name[32];
  std::snprintf(name, sizeof name, "%08u.seg", segment);
  return dir_ / "segments" / name;
}

std::unique_ptr<SegmentStore> SegmentStore::create(const fs::path& dir, StoreOptions options) {
  if (fs::exists(dir / "journal.bin")) fail(ErrorCode::kStoreExists, "store already exists at " + dir.string());
  std::error_code ec;
  fs::create_directories(dir / "segments", ec);
  if (ec) fail(ErrorCode::kIoFailure, "create " + dir.string() + ": " + ec.message());

  SegmentStore probe(dir, options);
  {
    const int fd = ::open(probe.segment_path(0).c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) io_fail("create segment");
    ::close(fd);
  }
  auto bytes = journal_header();
  auto entry = encode_journal_entry(kCommitted, 0, {SegmentMark{0, 0}});
  bytes.insert(bytes.end(), entry.begin(), entry.end());
  const auto tmp = dir / "journal.bin.tmp";
  const int fd = ::open(tmp.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) io_fail("create journal");
  write_all(fd, bytes.data(), bytes.size(), 0);
  if (options.fsync) sync_fd(fd, "journal");
  ::close(fd);
  fs::rename(tmp, dir / "journal.bin", ec);
  if (ec) fail(ErrorCode::kIoFailure, "rename journal: " + ec.message());
  if (options.fsync) {
    sync_dir(dir / "segments");
    sync_dir(dir);
  }
  return open(dir, std::move(options));
}

std::unique_ptr<SegmentStore> SegmentStore::open(const fs::path& dir, StoreOptions options) {
  if (!fs::exists(dir / "journal.bin")) fail(ErrorCode::kNotAStore, dir.string() + " is not an event store");
  std::unique_ptr<SegmentStore> store(new SegmentStore(dir, std::move(options)));
  store->lock_fd_ = ::open((dir / "LOCK").c_str(), O_RDWR | O_CREAT, 0644);
  if (store->lock_fd_ < 0) io_fail("open LOCK");
  if (::flock(store->lock_fd_, LOCK_EX | LOCK_NB) == 0) {
    try {
      store->recover_locked();
    } catch (...) {
      ::flock(store->lock_fd_, LOCK_UN);
      throw;
    }
    ::flock(store->lock_fd_, LOCK_UN);
  } else {
    store->load_journal(false);
  }
  return store;
}

void SegmentStore::load_journal(bool writer) {
  const int fd = ::open((dir_ / "journal.bin").c_str(), writer ? O_RDWR : O_RDONLY);
  if (fd < 0) fail(ErrorCode::kCorruptJournal, "cannot open journal");
  ResolvedJournal resolved;
  try {
    resolved = resolve_journal(parse_journal(fd));
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::unique_lock lock(mu_);
  committed_.clear();
  for (const auto& m : resolved.committed.marks) committed_[m.segment] = m.watermark;
  committed_txn_ = resolved.committed.txn;
}

void SegmentStore::recover_locked() {
  recovery_ = RecoveryReport{};
  if (journal_fd_ < 0) {
    journal_fd_ = ::open((dir_ / "journal.bin").c_str(), O_RDWR);
    if (journal_fd_ < 0) fail(ErrorCode::kCorruptJournal, "cannot open journal");
  }
  const auto parsed = parse_journal(journal_fd_);
  if (parsed.valid_end < parsed.file_size) {
    if (::ftruncate(journal_fd_, static_cast<off_t>(parsed.valid_end)) != 0) io_fail("truncate journal");
    recovery_.journal_tail_dropped = true;
  }
  journal_size_ = parsed.valid_end;
  auto resolved = resolve_journal(parsed);

  std::map<std::uint32_t, std::uint64_t> marks;
  for (const auto& m : resolved.committed.marks) marks[m.segment] = m.watermark;
  std::uint64_t txn = resolved.committed.txn;
  if (resolved.pending) {
    bool intact = true;
    for (const auto& m : resolved.pending->marks) {
      const auto it = marks.find(m.segment);
      const std::uint64_t from = it == marks.end() ? 0 : it->second;
      if (m.watermark < from || !validate_range(m.segment, from, m.watermark)) {
        intact = false;
        break;
      }
    }
    if (intact) {
      append_journal_entry(kCommitted, resolved.pending->txn, resolved.pending->marks, false);
      marks.clear();
      for (const auto& m : resolved.pending->marks) marks[m.segment] = m.watermark;
      txn = resolved.pending->txn;
      recovery_.outcome = RecoveryReport::Outcome::kRolledForward;
    } else {
      append_journal_entry(kAborted, resolved.pending->txn, {}, false);
      recovery_.outcome = RecoveryReport::Outcome::kRolledBack;
    }
    if (options_.fsync) sync_fd(journal_fd_, "journal");
  }

  bool dir_changed = false;
  for (const auto& [seg, wm] : marks) {
    const int fd = open_segment(seg, wm == 0);
    if (fd < 0) fail(ErrorCode::kCorruptJournal, "committed segment " + std::to_string(seg) + " is missing");
    const auto size = file_size(fd);
    if (size < wm) {
      fail(ErrorCode::kCorruptJournal, "segment " + std::to_string(seg) + " is shorter than its committed watermark");
    }
    if (size > wm) {
      if (::ftruncate(fd, static_cast<off_t>(wm)) != 0) io_fail("truncate segment");
      if (options_.fsync) sync_fd(fd, "segment");
      recovery_.truncated_bytes += size - wm;
    }
  }
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_ / "segments", ec)) {
    const auto name = entry.path().filename().string();
    unsigned seg = 0;
    if (std::sscanf(name.c_str(), "%08u.seg", &seg) != 1 || marks.count(seg)) continue;
    {
      std::lock_guard lock(fd_mu_);
      if (auto it = fds_.find(seg); it != fds_.end()) {
        ::close(it->second);
        fds_.erase(it);
      }
    }
    fs::remove(entry.path(), ec);
    ++recovery_.removed_segments;
    dir_changed = true;
  }
  if (dir_changed && options_.fsync) sync_dir(dir_ / "segments");

  {
    std::unique_lock lock(mu_);
    committed_ = std::move(marks);
    committed_txn_ = txn;
  }
  if (journal_size_ > kCompactJournalBytes) compact_journal();
}

bool SegmentStore::validate_range(std::uint32_t segment, std::uint64_t from, std::uint64_t to) {
  const int fd = open_segment(segment, false);
  if (fd < 0) return from == to;
  if (file_size(fd) < to) return false;
  bool crc_ok = true;
  ScanOptions options;
  options.verify_crc = true;
  const auto problem = walk_segment(fd, segment, from, to, options, [&](const ScannedRecord& rec) {
    if (!rec.crc_ok) crc_ok = false;
  });
  return !problem && crc_ok;
}

void SegmentStore::compact_journal() {
  auto bytes = journal_header();
  std::vector<SegmentMark> marks;
  std::uint64_t txn;
  {
    std::shared_lock lock(mu_);
    marks = to_marks(committed_);
    txn = committed_txn_;
  }
  auto entry = encode_journal_entry(kCommitted, txn, marks);
  bytes.insert(bytes.end(), entry.begin(), entry.end());
  const auto tmp = dir_ / "journal.bin.tmp";
  const int fd = ::open(tmp.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) io_fail("create journal");
  write_all(fd, bytes.data(), bytes.size(), 0);
  if (options_.fsync) sync_fd(fd, "journal");
  std::error_code ec;
  fs::rename(tmp, dir_ / "journal.bin", ec);
  if (ec) {
    ::close(fd);
    fail(ErrorCode::kIoFailure, "rename journal: " + ec.message());
  }
  if (options_.fsync) sync_dir(dir_);
  ::close(journal_fd_);
  journal_fd_ = fd;
  journal_size_ = bytes.size();
}

void SegmentStore::append_journal_entry(std::uint8_t state, std::uint64_t txn, const std::vector<SegmentMark>& marks,
                                        bool torn) {
  const auto bytes = encode_journal_entry(state, txn, marks);
  if (torn) {
    write_all(journal_fd_, bytes.data(), bytes.size() / 2, journal_size_);
    journal_size_ += bytes.size() / 2;
    return;
  }
  write_all(journal_fd_, bytes.data(), bytes.size(), journal_size_);
  journal_size_ += bytes.size();
}

int SegmentStore::open_segment(std::uint32_t segment, bool create) {
  std::lock_guard lock(fd_mu_);
  if (auto it = fds_.find(segment); it != fds_.end()) return it->second;
  int fd = ::open(segment_path(segment).c_str(), O_RDWR | (create ? O_CREAT : 0), 0644);
  if (fd < 0 && !create && errno == EACCES) fd = ::open(segment_path(segment).c_str(), O_RDONLY);
  if (fd < 0) {
    if (!create && errno == ENOENT) return -1;
    io_fail("open segment " + segment_path(segment).string());
  }
  fds_[segment] = fd;
  return fd;
}

int SegmentStore::segment_fd(std::uint32_t segment) const {
  {
    std::lock_guard lock(fd_mu_);
    if (auto it = fds_.find(segment); it != fds_.end()) return it->second;
  }
  const int fd = const_cast<SegmentStore*>(this)->open_segment(segment, false);
  if (fd < 0) fail(ErrorCode::kCorruptRecord, "segment " + std::to_string(segment) + " is missing");
  return fd;
}

void SegmentStore::check_usable() const {
  if (crashed_) fail(ErrorCode::kIoFailure, "store instance crashed; reopen the directory");
}

bool SegmentStore::begin() {
  check_usable();
  if (in_txn_) fail(ErrorCode::kWriterBusy, "a write transaction is already open");
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) fail(ErrorCode::kWriterBusy, "another writer holds the store");
  std::map<std::uint32_t, std::uint64_t> before;
  std::uint64_t before_txn;
  {
    std::shared_lock lock(mu_);
    before = committed_;
    before_txn = committed_txn_;
  }
  try {
    recover_locked();
  } catch (...) {
    ::flock(lock_fd_, LOCK_UN);
    throw;
  }
  {
    std::shared_lock lock(mu_);
    cursor_ = committed_;
  }
  active_segment_ = cursor_.rbegin()->first;
  buffer_.clear();
  buffer_offset_ = cursor_[active_segment_];
  in_txn_ = true;
  std::shared_lock lock(mu_);
  return before != committed_ || before_txn != committed_txn_;
}

Oref SegmentStore::append(RecordType type, std::span<const std::byte> payload) {
  check_usable();
  if (!in_txn_) fail(ErrorCode::kTransactionRequired, "append outside a write transaction");
  const std::uint64_t size = kRecordOverhead + payload.size();
  if (cursor_[active_segment_] > 0 && cursor_[active_segment_] + size > options_.segment_roll_bytes) {
    flush_buffer();
    active_segment_ += 1;
    open_segment(active_segment_, true);
    cursor_[active_segment_] = 0;
    buffer_offset_ = 0;
  }
  if (buffer_.empty()) buffer_offset_ = cursor_[active_segment_];
  const Oref ref{active_segment_, cursor_[active_segment_]};

  const auto len = static_cast<std::uint32_t>(payload.size());
  const auto crc = crc32c(payload);
  const auto at = buffer_.size();
  buffer_.resize(at + size);
  buffer_[at] = static_cast<std::byte>(type);
  std::memcpy(buffer_.data() + at + 1, &len, 4);
  if (!payload.empty()) std::memcpy(buffer_.data() + at + 5, payload.data(), payload.size());
  std::memcpy(buffer_.data() + at + 5 + payload.size(), &crc, 4);
  cursor_[active_segment_] += size;

  if (buffer_.size() >= options_.write_buffer_bytes) flush_buffer();
  return ref;
}

void SegmentStore::flush_buffer() {
  if (buffer_.empty()) return;
  write_all(segment_fd(active_segment_), buffer_.data(), buffer_.size(), buffer_offset_);
  buffer_offset_ += buffer_.size();
  buffer_.clear();
}

void SegmentStore::sync_touched() {
  if (!options_.fsync) return;
  bool created = false;
  std::map<std::uint32_t, std::uint64_t> committed;
  {
    std::shared_lock lock(mu_);
    committed = committed_;
  }
  for (const auto& [seg, cur] : cursor_) {
    const auto it = committed.find(seg);
    if (it == committed.end()) created = true;
    if (it == committed.end() || it->second != cur) sync_fd(segment_fd(seg), "segment");
  }
  if (created) sync_dir(dir_ / "segments");
}

void SegmentStore::fault_point(CommitStep step) {
  if (!options_.fault || options_.fault->step != step) return;
  const auto kind = options_.fault->kind;
  options_.fault.reset();
  if (kind == FaultPlan::Kind::kCrash) throw SimulatedCrash(step);
  errno = EIO;
  io_fail("injected I/O error at " + std::string(commit_step_name(step)));
}

void SegmentStore::commit() {
  check_usable();
  if (!in_txn_) fail(ErrorCode::kTransactionRequired, "commit outside a write transaction");
  const bool crash_plan = options_.fault && options_.fault->kind == FaultPlan::Kind::kCrash;
  const auto plan_step = options_.fault ? options_.fault->step : CommitStep::kBeforeDataWrite;
  const std::uint64_t journal_before = journal_size_;
  std::vector<SegmentMark> marks = to_marks(cursor_);
  std::uint64_t txn;
  {
    std::shared_lock lock(mu_);
    txn = committed_txn_ + 1;
  }
  try {
    fault_point(CommitStep::kBeforeDataWrite);
    flush_buffer();
    if (crash_plan && plan_step == CommitStep::kTornDataWrite) {
      std::uint64_t start;
      {
        std::shared_lock lock(mu_);
        const auto it = committed_.find(active_segment_);
        start = it == committed_.end() ? 0 : it->second;
      }
      const std::uint64_t keep = start + (cursor_[active_segment_] - start) / 2;
      if (::ftruncate(segment_fd(active_segment_), static_cast<off_t>(keep)) != 0) io_fail("truncate");
    }
    fault_point(CommitStep::kTornDataWrite);
    fault_point(CommitStep::kAfterDataWrite);
    sync_touched();
    fault_point(CommitStep::kAfterDataSync);

    bool changed;
    {
      std::shared_lock lock(mu_);
      changed = marks != to_marks(committed_);
    }
    if (changed) {
      append_journal_entry(kPrepared, txn, marks, crash_plan && plan_step == CommitStep::kTornPrepare);
      fault_point(CommitStep::kTornPrepare);
      fault_point(CommitStep::kAfterPrepareWrite);
      if (options_.fsync) sync_fd(journal_fd_, "journal");
      fault_point(CommitStep::kAfterPrepareSync);
      append_journal_entry(kCommitted, txn, marks, crash_plan && plan_step == CommitStep::kTornCommit);
      fault_point(CommitStep::kTornCommit);
      fault_point(CommitStep::kAfterCommitWrite);
      if (options_.fsync) sync_fd(journal_fd_, "journal");
      fault_point(CommitStep::kAfterCommitSync);
    }
  } catch (const SimulatedCrash&) {
    crashed_ = true;
    in_txn_ = false;
    ::flock(lock_fd_, LOCK_UN);
    throw;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIoFailure) {
      if (journal_size_ != journal_before) {
        if (::ftruncate(journal_fd_, static_cast<off_t>(journal_before)) == 0) journal_size_ = journal_before;
        if (options_.fsync) (void)::fsync(journal_fd_);
      }
      rollback_txn();
      release_lease();
    }
    throw;
  }

  {
    std::unique_lock lock(mu_);
    if (marks != to_marks(committed_)) committed_txn_ += 1;
    committed_ = cursor_;
  }
  in_txn_ = false;
  release_lease();
}

void SegmentStore::abort() {
  if (!in_txn_) return;
  rollback_txn();
  release_lease();
}

void SegmentStore::rollback_txn() {
  buffer_.clear();
  std::map<std::uint32_t, std::uint64_t> committed;
  {
    std::shared_lock lock(mu_);
    committed = committed_;
  }
  for (const auto& [seg, cur] : cursor_) {
    const auto it = committed.find(seg);
    if (it != committed.end()) {
      if (::ftruncate(segment_fd(seg), static_cast<off_t>(it->second)) != 0) io_fail("truncate segment");
      continue;
    }
    {
      std::lock_guard lock(fd_mu_);
      if (auto f = fds_.find(seg); f != fds_.end()) {
        ::close(f->second);
        fds_.erase(f);
      }
    }
    std::error_code ec;
    fs::remove(segment_path(seg), ec);
  }
  cursor_ = committed;
  in_txn_ = false;
}

void SegmentStore::release_lease() {
  if (lock_fd_ >= 0) ::flock(lock_fd_, LOCK_UN);
}

StoredRecord SegmentStore::read_bounded(const Oref& ref, std::uint64_t limit) const {
  if (ref.offset + kRecordOverhead > limit) fail(ErrorCode::kUnknownRef, "no committed record at " + to_string(ref));
  const int fd = segment_fd(ref.segment);
  std::byte head[5];
  if (read_upto(fd, head, 5, ref.offset) != 5) fail(ErrorCode::kCorruptRecord, "torn record at " + to_string(ref));
  const auto code = static_cast<std::uint8_t>(head[0]);
  std::uint32_t len;
  std::memcpy(&len, head + 1, 4);
  if (!is_valid_record_type(code)) fail(ErrorCode::kCorruptRecord, "bad record type at " + to_string(ref));
  if (ref.offset + kRecordOverhead + len > limit) {
    fail(ErrorCode::kCorruptRecord, "record at " + to_string(ref) + " extends past the watermark");
  }
  StoredRecord out{static_cast<RecordType>(code), std::vector<std::byte>(len + 4)};
  if (read_upto(fd, out.payload.data(), out.payload.size(), ref.offset + 5) != out.payload.size()) {
    fail(ErrorCode::kCorruptRecord, "torn record at " + to_string(ref));
  }
  std::uint32_t stored;
  std::memcpy(&stored, out.payload.data() + len, 4);
  out.payload.resize(len);
  if (crc32c(out.payload) != stored) fail(ErrorCode::kCorruptRecord, "checksum mismatch at " + to_string(ref));
  return out;
}

StoredRecord SegmentStore::read(const Oref& ref) const {
  std::uint64_t limit;
  {
    std::shared_lock lock(mu_);
    const auto it = committed_.find(ref.segment);
    if (it == committed_.end()) fail(ErrorCode::kUnknownRef, "no committed segment for " + to_string(ref));
    limit = it->second;
  }
  return read_bounded(ref, limit);
}

StoredRecord SegmentStore::read_own(const Oref& ref) {
  if (!in_txn_) return read(ref);
  const auto it = cursor_.find(ref.segment);
  if (it == cursor_.end()) fail(ErrorCode::kUnknownRef, "no segment for " + to_string(ref));
  if (ref.segment == active_segment_ && ref.offset + kRecordOverhead > buffer_offset_) flush_buffer();
  return read_bounded(ref, it->second);
}

std::pair<RecordType, std::uint32_t> SegmentStore::read_prefix(const Oref& ref, std::size_t n,
                                                               std::vector<std::byte>& out) const {
  std::uint64_t limit;
  {
    std::shared_lock lock(mu_);
    const auto it = committed_.find(ref.segment);
    if (it == committed_.end()) fail(ErrorCode::kUnknownRef, "no committed segment for " + to_string(ref));
    limit = it->second;
  }
  if (ref.offset + kRecordOverhead > limit) fail(ErrorCode::kUnknownRef, "no committed record at " + to_string(ref));
  const int fd = segment_fd(ref.segment);
  std::byte head[5];
  if (read_upto(fd, head, 5, ref.offset) != 5) fail(ErrorCode::kCorruptRecord, "torn record at " + to_string(ref));
  const auto code = static_cast<std::uint8_t>(head[0]);
  std::uint32_t len;
  std::memcpy(&len, head + 1, 4);
  if (!is_valid_record_type(code) || ref.offset + kRecordOverhead + len > limit) {
    fail(ErrorCode::kCorruptRecord, "bad record framing at " + to_string(ref));
  }
  out.resize(std::min<std::size_t>(n, len));
  if (read_upto(fd, out.data(), out.size(), ref.offset + 5) != out.size()) {
    fail(ErrorCode::kCorruptRecord, "torn record at " + to_string(ref));
  }
  return {static_cast<RecordType>(code), len};
}

std::vector<ScanProblem> SegmentStore::scan(const ScanOptions& options,
                                            const std::function<void(const ScannedRecord&)>& visit) const {
  std::map<std::uint32_t, std::uint64_t> marks;
  {
    std::shared_lock lock(mu_);
    marks = committed_;
  }
  std::vector<ScanProblem> problems;
  for (const auto& [seg, wm] : marks) {
    if (wm == 0) continue;
    int fd;
    try {
      fd = segment_fd(seg);
    } catch (const Error& e) {
      problems.push_back({Oref{seg, 0}, e.what()});
      continue;
    }
    if (auto problem = walk_segment(fd, seg, 0, wm, options, visit)) problems.push_back(std::move(*problem));
  }
  return problems;
}

std::vector<SegmentMark> SegmentStore::watermarks() const {
  std::shared_lock lock(mu_);
  return to_marks(committed_);
}

std::uint64_t SegmentStore::committed_txn() const {
  std::shared_lock lock(mu_);
  return committed_txn_;
}

}  // namespace evstore
