#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "evstore/workload.hpp"
#include "support.hpp"

using namespace evstore;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

WorkloadSpec random_spec(std::mt19937_64& rng) {
  WorkloadSpec s;
  s.event_count = 1 + rng() % 40;
  s.components_per_event = static_cast<std::uint32_t>(rng() % 5);
  s.key_len = static_cast<std::uint32_t>(2 + rng() % 10);
  s.type_len = static_cast<std::uint32_t>(2 + rng() % 10);
  s.payload_len = static_cast<std::uint32_t>(rng() % 40);
  s.bool_attrs = static_cast<std::uint32_t>(rng() % 70);
  s.int_attrs = static_cast<std::uint32_t>(rng() % 6);
  s.float_attrs = static_cast<std::uint32_t>(rng() % 6);
  if (rng() % 4 == 0) s.static_change_period.reset();
  else s.static_change_period = 1 + rng() % 10;
  s.descriptor_pool = static_cast<std::uint32_t>(1 + rng() % 4);
  s.seed = rng();
  s.experiment_label = "Exp" + std::to_string(rng() % 100);
  s.config_key = static_cast<std::uint32_t>(rng() % 5);
  return s;
}

}  // namespace

TEST(Workload, W0Defaults) {
  const auto s = w0_spec();
  EXPECT_EQ(s.event_count, 100000u);
  EXPECT_EQ(s.components_per_event, 10u);
  EXPECT_EQ(s.bool_attrs + s.int_attrs + s.float_attrs, 500u);
  EXPECT_EQ(s.distinct_static_fragments(), 100u);
  EXPECT_EQ(s.descriptor_pool, 4u);
}

TEST(Workload, StaticFragmentsFollowThePeriod) {
  // W0's id stream without the payload and tag weight.
  auto s = w0_spec();
  s.components_per_event = 0;
  s.bool_attrs = s.int_attrs = s.float_attrs = 0;
  WorkloadGenerator gen(s);
  std::set<std::tuple<std::string, std::uint32_t, std::uint32_t>> fragments;
  std::uint64_t n = 0;
  std::uint64_t last_ts = 0;
  while (!gen.done()) {
    const auto ev = gen.next();
    EXPECT_EQ(ev.id.event_number, n);
    if (n) {
      EXPECT_GT(ev.id.timestamp_us, last_ts);
    }
    last_ts = ev.id.timestamp_us;
    fragments.emplace(ev.id.experiment_label, ev.id.run_number, ev.id.config_key);
    ++n;
  }
  EXPECT_EQ(n, 100000u);
  EXPECT_EQ(fragments.size(), 100u);
  EXPECT_EQ(code_of([&] { gen.next(); }), ErrorCode::kInvalidArgument);

  s.static_change_period.reset();
  s.event_count = 5000;
  std::set<std::uint32_t> runs;
  for (const auto& ev : generate_workload(s)) runs.insert(ev.id.run_number);
  EXPECT_EQ(runs.size(), 1u);
  EXPECT_EQ(s.distinct_static_fragments(), 1u);
}

TEST(Workload, ShapeMatchesSpec) {
  WorkloadSpec s;
  s.event_count = 12;
  s.components_per_event = 3;
  s.key_len = 5;
  s.type_len = 7;
  s.payload_len = 13;
  s.bool_attrs = 3;
  s.int_attrs = 2;
  s.float_attrs = 1;
  s.descriptor_pool = 3;
  const auto events = generate_workload(s);
  ASSERT_EQ(events.size(), 12u);
  std::set<std::uint64_t> descriptors;
  for (const auto& ev : events) {
    ASSERT_EQ(ev.components.size(), 3u);
    for (std::uint32_t j = 0; j < 3; ++j) {
      EXPECT_EQ(ev.components[j].entry.key.size(), 5u);
      EXPECT_EQ(ev.components[j].entry.type_name.size(), 7u);
      EXPECT_EQ(ev.components[j].payload.size(), 13u);
    }
    EXPECT_EQ(ev.components[2].entry.key, "k0002");
    EXPECT_EQ(ev.components[2].entry.type_name, "T000002");
    EXPECT_EQ(ev.tag.descriptor().specs().size(), 6u);
    descriptors.insert(ev.tag.descriptor().id());
  }
  EXPECT_EQ(descriptors.size(), 3u);
}

TEST(Workload, SingleEventAndZeroCounts) {
  WorkloadSpec s;
  s.event_count = 1;
  s.components_per_event = 0;
  s.bool_attrs = s.int_attrs = s.float_attrs = 0;
  s.payload_len = 0;
  const auto events = generate_workload(s);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_TRUE(events[0].components.empty());
  EXPECT_TRUE(events[0].tag.descriptor().specs().empty());
  EXPECT_EQ(s.distinct_static_fragments(), 1u);
}

TEST(Workload, SpecParsing) {
  const auto s = parse_workload_spec(
      "# comment\n"
      "event_count = 500\n"
      "components_per_event=3  # trailing\n"
      "\n"
      "static_change_period=inf\r\n"
      "descriptor_pool=2\n"
      "seed=7\n"
      "experiment_label=CMS\n");
  EXPECT_EQ(s.event_count, 500u);
  EXPECT_EQ(s.components_per_event, 3u);
  EXPECT_FALSE(s.static_change_period);
  EXPECT_EQ(s.descriptor_pool, 2u);
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.experiment_label, "CMS");
  EXPECT_EQ(parse_workload_spec(format_workload_spec(w0_spec())), w0_spec());

  for (const char* bad : {"event_count=0", "event_count=-1", "event_count=1x", "bogus=1", "no equals sign",
                          "static_change_period=0", "descriptor_pool=0", "key_len=0", "key_len=1\ncomponents_per_event=2",
                          "key_len=2\ncomponents_per_event=11", "experiment_label=a;b", "experiment_label="}) {
    EXPECT_EQ(code_of([&] { parse_workload_spec(bad); }), ErrorCode::kBadSpec) << bad;
  }
  EXPECT_EQ(code_of([] { load_workload_spec("/nonexistent/spec.txt"); }), ErrorCode::kBadSpec);
}

TEST(WorkloadProperty, FormatParseRoundTrip) {
  std::mt19937_64 rng(31);
  for (int c = 0; c < 10000; ++c) {
    const auto s = random_spec(rng);
    ASSERT_EQ(parse_workload_spec(format_workload_spec(s)), s) << format_workload_spec(s);
  }
}

TEST(WorkloadProperty, GenerationIsDeterministic) {
  std::mt19937_64 rng(32);
  for (int c = 0; c < 300; ++c) {
    const auto s = random_spec(rng);
    const auto a = generate_workload(s);
    const auto b = generate_workload(s);
    ASSERT_EQ(a.size(), s.event_count);
    std::set<std::uint32_t> runs;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_EQ(compare_events(a[i], b[i]), "");
      ASSERT_EQ(a[i].tag.persistent_values(), b[i].tag.persistent_values());
      ASSERT_EQ(a[i].components, b[i].components);
      runs.insert(a[i].id.run_number);
    }
    EXPECT_EQ(runs.size(), s.distinct_static_fragments());
    auto other = s;
    other.seed ^= 1;
    if (s.payload_len && s.components_per_event) {
      EXPECT_NE(generate_workload(other)[0].components, a[0].components);
    }
  }
}
