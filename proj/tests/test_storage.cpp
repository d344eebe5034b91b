#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "evstore/storage.hpp"
#include "support.hpp"

using namespace evstore;

namespace {

std::vector<std::byte> bytes_of(const std::string& s) {
  std::vector<std::byte> out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

StoreOptions fast() {
  StoreOptions o;
  o.fsync = false;
  return o;
}

}  // namespace

TEST(Storage, EmptyPayloadRecordIsNineBytes) {
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  s->begin();
  const auto a = s->append(RecordType::kData, {});
  const auto b = s->append(RecordType::kData, {});
  EXPECT_EQ(a.offset, 0u);
  EXPECT_EQ(b.offset - a.offset, kRecordOverhead);
  EXPECT_EQ(kRecordOverhead, 9u);
  s->commit();
  EXPECT_EQ(std::filesystem::file_size(s->segment_path(0)), 18u);
  EXPECT_TRUE(s->read(a).payload.empty());
}

TEST(Storage, FramingBytes) {
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  s->begin();
  const auto payload = bytes_of("hello");
  s->append(RecordType::kTag, payload);
  s->commit();
  const auto raw = test::read_file(s->segment_path(0));
  ASSERT_EQ(raw.size(), 5u + kRecordOverhead);
  EXPECT_EQ(static_cast<int>(raw[0]), 5);
  std::uint32_t len, crc;
  std::memcpy(&len, raw.data() + 1, 4);
  std::memcpy(&crc, raw.data() + 10, 4);
  EXPECT_EQ(len, 5u);
  // CRC-32C check value of "123456789" is 0xE3069283.
  EXPECT_EQ(crc32c(bytes_of("123456789")), 0xE3069283u);
  EXPECT_EQ(crc, crc32c(payload));
}

TEST(Storage, OffsetsIncrease) {
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  s->begin();
  Oref last{0, 0};
  for (int i = 0; i < 100; ++i) {
    const auto r = s->append(RecordType::kData, bytes_of(std::string(i, 'x')));
    if (i) {
      EXPECT_GT(r, last);
    }
    last = r;
  }
  s->commit();
}

TEST(Storage, UncommittedRefIsUnknown) {
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  s->begin();
  const auto r = s->append(RecordType::kData, bytes_of("abc"));
  EXPECT_EQ(code_of([&] { s->read(r); }), ErrorCode::kUnknownRef);
  EXPECT_EQ(s->read_own(r).payload, bytes_of("abc"));
  s->commit();
  EXPECT_EQ(s->read(r).payload, bytes_of("abc"));
  EXPECT_EQ(code_of([&] { s->read(Oref{0, 1}); }), ErrorCode::kCorruptRecord);
  EXPECT_EQ(code_of([&] { s->read(Oref{0, 400}); }), ErrorCode::kUnknownRef);
  EXPECT_EQ(code_of([&] { s->read(Oref{7, 0}); }), ErrorCode::kUnknownRef);
}

TEST(Storage, AppendNeedsTransaction) {
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  EXPECT_EQ(code_of([&] { s->append(RecordType::kData, {}); }), ErrorCode::kTransactionRequired);
  EXPECT_EQ(code_of([&] { s->commit(); }), ErrorCode::kTransactionRequired);
}

TEST(Storage, CommitThenReopen) {
  test::ScratchDir dir;
  std::vector<std::pair<Oref, std::vector<std::byte>>> written;
  {
    auto s = SegmentStore::create(dir.path());
    std::mt19937_64 rng(3);
    for (int t = 0; t < 5; ++t) {
      s->begin();
      for (int i = 0; i < 20; ++i) {
        auto p = bytes_of(test::random_name(rng, 0, 40));
        written.emplace_back(s->append(RecordType::kData, p), p);
      }
      s->commit();
    }
    EXPECT_EQ(s->committed_txn(), 5u);
  }
  auto s = SegmentStore::open(dir.path());
  EXPECT_EQ(s->last_recovery().outcome, RecoveryReport::Outcome::kClean);
  for (const auto& [ref, p] : written) EXPECT_EQ(s->read(ref).payload, p);
  std::size_t seen = 0;
  const auto problems = s->scan({.full_payload_types = ~0u}, [&](const ScannedRecord& r) {
    ASSERT_LT(seen, written.size());
    EXPECT_EQ(r.ref, written[seen].first);
    EXPECT_TRUE(r.crc_checked);
    EXPECT_TRUE(r.crc_ok);
    ++seen;
  });
  EXPECT_TRUE(problems.empty());
  EXPECT_EQ(seen, written.size());
}

TEST(Storage, AbortLeavesStoreByteIdentical) {
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  s->begin();
  s->append(RecordType::kData, bytes_of("kept"));
  s->commit();
  const auto before = test::snapshot_dir(dir.path());
  s->begin();
  for (int i = 0; i < 50; ++i) s->append(RecordType::kData, bytes_of(std::string(1000, 'z')));
  s->abort();
  EXPECT_EQ(test::snapshot_dir(dir.path()), before);
}

TEST(Storage, AbortAcrossSegmentRollRemovesNewSegments) {
  test::ScratchDir dir;
  auto opts = fast();
  opts.segment_roll_bytes = 256;
  auto s = SegmentStore::create(dir.path(), opts);
  s->begin();
  s->append(RecordType::kData, bytes_of("kept"));
  s->commit();
  const auto before = test::snapshot_dir(dir.path());
  s->begin();
  for (int i = 0; i < 20; ++i) s->append(RecordType::kData, bytes_of(std::string(100, 'z')));
  s->abort();
  EXPECT_EQ(test::snapshot_dir(dir.path()), before);
}

TEST(Storage, SingleWriter) {
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  s->begin();
  EXPECT_EQ(code_of([&] { s->begin(); }), ErrorCode::kWriterBusy);
  auto other = SegmentStore::open(dir.path(), fast());
  EXPECT_EQ(code_of([&] { other->begin(); }), ErrorCode::kWriterBusy);
  s->commit();
  EXPECT_NO_THROW(other->begin());
  other->abort();
}

TEST(Storage, OpenAndCreateErrors) {
  test::ScratchDir dir;
  EXPECT_EQ(code_of([&] { SegmentStore::open(dir / "missing"); }), ErrorCode::kNotAStore);
  SegmentStore::create(dir / "s", fast());
  EXPECT_EQ(code_of([&] { SegmentStore::create(dir / "s", fast()); }), ErrorCode::kStoreExists);
}

TEST(Storage, SegmentsRoll) {
  test::ScratchDir dir;
  auto opts = fast();
  opts.segment_roll_bytes = 1000;
  std::vector<std::pair<Oref, std::vector<std::byte>>> written;
  {
    auto s = SegmentStore::create(dir.path(), opts);
    for (int t = 0; t < 3; ++t) {
      s->begin();
      for (int i = 0; i < 30; ++i) {
        auto p = bytes_of(std::string(90, static_cast<char>('a' + i % 26)));
        written.emplace_back(s->append(RecordType::kData, p), p);
      }
      s->commit();
    }
    EXPECT_GT(s->watermarks().size(), 5u);
  }
  auto s = SegmentStore::open(dir.path(), opts);
  for (const auto& [ref, p] : written) EXPECT_EQ(s->read(ref).payload, p);
  for (const auto& m : s->watermarks()) EXPECT_LE(m.watermark, 1000u);
}

TEST(Storage, TornTailIsTruncated) {
  test::ScratchDir dir;
  Oref ref;
  {
    auto s = SegmentStore::create(dir.path(), fast());
    s->begin();
    ref = s->append(RecordType::kData, bytes_of("durable"));
    s->commit();
  }
  const auto seg = dir.path() / "segments" / "00000000.seg";
  const auto committed_size = std::filesystem::file_size(seg);
  {
    std::ofstream f(seg, std::ios::binary | std::ios::app);
    const char junk[] = {2, 100, 0, 0, 0, 'p', 'a', 'r'};
    f.write(junk, sizeof junk);
  }
  auto s = SegmentStore::open(dir.path(), fast());
  EXPECT_EQ(std::filesystem::file_size(seg), committed_size);
  EXPECT_EQ(s->last_recovery().truncated_bytes, 8u);
  EXPECT_EQ(s->read(ref).payload, bytes_of("durable"));
}

TEST(Storage, BitFlipDetectedOnRead) {
  test::ScratchDir dir;
  Oref ref;
  {
    auto s = SegmentStore::create(dir.path(), fast());
    s->begin();
    s->append(RecordType::kData, bytes_of("first"));
    ref = s->append(RecordType::kData, bytes_of("second"));
    s->commit();
  }
  test::flip_byte(dir.path() / "segments" / "00000000.seg", ref.offset + 6);
  auto s = SegmentStore::open(dir.path(), fast());
  EXPECT_EQ(code_of([&] { s->read(ref); }), ErrorCode::kCorruptRecord);
  std::vector<Oref> bad;
  s->scan({.verify_crc = true}, [&](const ScannedRecord& r) {
    if (!r.crc_ok) bad.push_back(r.ref);
  });
  EXPECT_EQ(bad, std::vector<Oref>{ref});
}

TEST(Storage, CorruptJournalIsReported) {
  test::ScratchDir dir;
  SegmentStore::create(dir.path(), fast());
  {
    std::ofstream f(dir.path() / "journal.bin", std::ios::binary | std::ios::trunc);
    f << "garbage!";
  }
  EXPECT_EQ(code_of([&] { SegmentStore::open(dir.path(), fast()); }), ErrorCode::kCorruptJournal);
}

class CommitFaults : public ::testing::TestWithParam<CommitStep> {};

// A crash at any step leaves either the whole transaction or none of it
// after recovery; which one is fixed by whether the prepared entry is durable.
TEST_P(CommitFaults, CrashIsAllOrNothing) {
  const auto step = GetParam();
  test::ScratchDir dir;
  Oref base;
  std::vector<Oref> txn_refs;
  {
    auto s = SegmentStore::create(dir.path(), fast());
    s->begin();
    base = s->append(RecordType::kData, bytes_of("base"));
    s->commit();
    s->begin();
    for (int i = 0; i < 40; ++i) txn_refs.push_back(s->append(RecordType::kData, bytes_of("t" + std::to_string(i))));
    s->options().fault = FaultPlan{step, FaultPlan::Kind::kCrash};
    EXPECT_THROW(s->commit(), SimulatedCrash);
    EXPECT_EQ(code_of([&] { s->begin(); }), ErrorCode::kIoFailure);
  }
  auto s = SegmentStore::open(dir.path(), fast());
  EXPECT_EQ(s->read(base).payload, bytes_of("base"));
  const bool durable = crash_step_is_durable(step);
  std::size_t visible = 0;
  for (std::size_t i = 0; i < txn_refs.size(); ++i) {
    try {
      EXPECT_EQ(s->read(txn_refs[i]).payload, bytes_of("t" + std::to_string(i)));
      ++visible;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kUnknownRef);
    }
  }
  EXPECT_EQ(visible, durable ? txn_refs.size() : 0u) << commit_step_name(step);
  EXPECT_EQ(s->committed_txn(), durable ? 2u : 1u);
  // The store accepts new work after recovery.
  s->begin();
  const auto after = s->append(RecordType::kData, bytes_of("after"));
  s->commit();
  EXPECT_EQ(s->read(after).payload, bytes_of("after"));
}

// An injected I/O error rolls the transaction back in place and leaves the
// same instance usable.
TEST_P(CommitFaults, IoErrorRollsBack) {
  const auto step = GetParam();
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  s->begin();
  const auto base = s->append(RecordType::kData, bytes_of("base"));
  s->commit();
  const auto before = test::snapshot_dir(dir.path());
  s->begin();
  const auto lost = s->append(RecordType::kData, bytes_of("lost"));
  s->options().fault = FaultPlan{step, FaultPlan::Kind::kIoError};
  EXPECT_EQ(code_of([&] { s->commit(); }), ErrorCode::kIoFailure);
  EXPECT_FALSE(s->in_txn());
  EXPECT_EQ(code_of([&] { s->read(lost); }), ErrorCode::kUnknownRef);
  EXPECT_EQ(test::snapshot_dir(dir.path()), before);
  s->begin();
  const auto next = s->append(RecordType::kData, bytes_of("next"));
  s->commit();
  auto reopened = SegmentStore::open(dir.path(), fast());
  EXPECT_EQ(reopened->read(base).payload, bytes_of("base"));
  EXPECT_EQ(reopened->read(next).payload, bytes_of("next"));
}

INSTANTIATE_TEST_SUITE_P(AllSteps, CommitFaults, ::testing::ValuesIn(kAllCommitSteps),
                         [](const auto& info) { return std::string(commit_step_name(info.param)); });

TEST(Storage, ReadersSeeOnlyCommittedState) {
  test::ScratchDir dir;
  auto s = SegmentStore::create(dir.path(), fast());
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> reads{0};
  std::vector<Oref> committed;
  std::mutex mu;
  std::thread reader([&] {
    while (!stop) {
      std::vector<Oref> snap;
      {
        std::lock_guard lock(mu);
        snap = committed;
      }
      for (const auto& r : snap) {
        auto rec = s->read(r);
        ASSERT_EQ(rec.payload.size(), 32u);
        ++reads;
      }
    }
  });
  for (int t = 0; t < 50; ++t) {
    s->begin();
    std::vector<Oref> mine;
    for (int i = 0; i < 10; ++i) mine.push_back(s->append(RecordType::kData, bytes_of(std::string(32, 'r'))));
    s->commit();
    std::lock_guard lock(mu);
    committed.insert(committed.end(), mine.begin(), mine.end());
  }
  while (reads.load() < committed.size()) std::this_thread::yield();
  stop = true;
  reader.join();
  EXPECT_GE(reads.load(), committed.size());
}
