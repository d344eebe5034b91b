#include <gtest/gtest.h>

#include <json.hpp>
#include <random>

#include "evstore/bench.hpp"
#include "support.hpp"

using namespace evstore;

namespace {

BenchOptions fast(std::uint64_t batch = 10000) {
  BenchOptions o;
  o.fsync = false;
  o.batch_events = batch;
  return o;
}

WorkloadSpec small_spec() {
  WorkloadSpec s;
  s.event_count = 600;
  s.components_per_event = 4;
  s.payload_len = 32;
  s.bool_attrs = 9;
  s.int_attrs = 5;
  s.float_attrs = 3;
  s.static_change_period = 100;
  s.descriptor_pool = 3;
  return s;
}

}  // namespace

TEST(Bench, LiveAccountingMatchesColdScan) {
  test::ScratchDir dir;
  const auto r = run_comparison(small_spec(), dir.path(), fast());
  EXPECT_TRUE(r.consistent());
  EXPECT_EQ(r.live.v1.events, 600u);
  EXPECT_EQ(r.live.v2.distinct_commons, 6u);
  EXPECT_EQ(r.live.v2.distinct_descriptors, 3u);
  EXPECT_EQ(r.live.v1.distinct_descriptors, 1u);
  EXPECT_GT(r.live.reduction_ratio, 0.0);
  EXPECT_LT(r.live.reduction_ratio, 1.0);
}

// Small batches make the v1 union widen across commits, which rewrites tags.
TEST(Bench, GrowingUnionStillConsistent) {
  test::ScratchDir dir;
  auto s = small_spec();
  s.event_count = 40;
  const auto r = run_comparison(s, dir.path(), fast(2));
  EXPECT_TRUE(r.consistent());
  // batch 1 holds pool descriptors 0 and 1, batch 2 adds 2: one widening,
  // two unions written, the two first-batch tags rewritten
  EXPECT_EQ(r.live.v1.distinct_descriptors, 2u);
  EXPECT_EQ(r.live.v1.object_count, 40u * (2 + 2 * 4) + 40 + 2 + 2);
}

// No components, no attributes, one static fragment: the only difference
// between the layouts is the id object, header count and tag placement.
TEST(Bench, ZeroComponentClosedForm) {
  WorkloadSpec s;
  s.event_count = 1000;
  s.components_per_event = 0;
  s.payload_len = 0;
  s.bool_attrs = s.int_attrs = s.float_attrs = 0;
  s.static_change_period.reset();
  s.descriptor_pool = 1;
  test::ScratchDir dir;
  const auto r = run_comparison(s, dir.path(), fast());
  ASSERT_TRUE(r.consistent());

  // v1 event: 16 header + 4 count + 8 id ref + 8 tag ref = 36
  // v1 id object: 16 + (4 + 5) + 2*4 + 2*8 = 49
  // empty tag: 16 + 8 = 24; empty union descriptor: 16 + 8 + 4 = 28, once
  const std::uint64_t v1_total = 1000 * (36 + 49 + 24) + 28;
  // v2 event: 16 + 2*8 + 8 + 8 = 48, tag 24; one common: 16 + 8 + (4+5) + 2*4 + (4+0) = 45
  const std::uint64_t v2_total = 1000 * (48 + 24) + 45;
  EXPECT_EQ(r.live.v1.nav_bytes_total, v1_total);
  EXPECT_EQ(r.live.v2.nav_bytes_total, v2_total);
  EXPECT_DOUBLE_EQ(r.live.v1.nav_bytes_per_event, v1_total / 1000.0);
  EXPECT_NEAR(r.live.reduction_ratio, 1.0 - 72.045 / 109.028, 1e-12);
  // v1: event, id object, tag per event plus the union; v2: event, tag per event plus common and descriptor
  EXPECT_EQ(r.live.v1.object_count, 3001u);
  EXPECT_EQ(r.live.v2.object_count, 2002u);
  EXPECT_EQ(r.live.v2.distinct_commons, 1u);
}

TEST(Bench, ReportsAreDeterministic) {
  test::ScratchDir a, b;
  auto s = small_spec();
  s.event_count = 120;
  const auto ra = run_comparison(s, a.path(), fast(50));
  const auto rb = run_comparison(s, b.path(), fast(50));
  EXPECT_EQ(format_report_text(ra), format_report_text(rb));
  EXPECT_EQ(format_report_csv(ra), format_report_csv(rb));
  const auto text = format_report_text(ra);
  EXPECT_NE(text.find("workload.event_count=120\n"), std::string::npos);
  EXPECT_NE(text.find("cold_scan_match=true\n"), std::string::npos);

  const auto j = nlohmann::json::parse(format_report_json(ra));
  EXPECT_EQ(j["v1"]["events"], 120);
  EXPECT_EQ(j["v2"]["nav_bytes_total"], ra.live.v2.nav_bytes_total);
  EXPECT_DOUBLE_EQ(j["reduction_ratio"].get<double>(), ra.live.reduction_ratio);
  EXPECT_TRUE(j["timings"].contains("scan_seconds"));
  EXPECT_EQ(j["workload"]["static_change_period"], 100);

  EXPECT_EQ(scan_comparison(a.path()), ra.cold);
  try {
    run_comparison(s, a.path(), fast());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStoreExists);
  }
}

TEST(BenchProperty, RandomSpecsStayConsistent) {
  std::mt19937_64 rng(41);
  for (int c = 0; c < 25; ++c) {
    WorkloadSpec s;
    s.event_count = 1 + rng() % 60;
    s.components_per_event = static_cast<std::uint32_t>(rng() % 4);
    s.payload_len = static_cast<std::uint32_t>(rng() % 16);
    s.bool_attrs = static_cast<std::uint32_t>(rng() % 10);
    s.int_attrs = static_cast<std::uint32_t>(rng() % 4);
    s.float_attrs = static_cast<std::uint32_t>(rng() % 4);
    if (rng() % 3 == 0) s.static_change_period.reset();
    else s.static_change_period = 1 + rng() % 20;
    s.descriptor_pool = static_cast<std::uint32_t>(1 + rng() % 4);
    s.seed = rng();
    test::ScratchDir dir;
    const auto r = run_comparison(s, dir.path(), fast(1 + rng() % 20));
    ASSERT_TRUE(r.consistent()) << format_workload_spec(s);
    EXPECT_EQ(r.live.v2.distinct_commons, s.distinct_static_fragments());
  }
}
