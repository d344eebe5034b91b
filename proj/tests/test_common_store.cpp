#include <gtest/gtest.h>

#include <set>

#include "evstore/common_store.hpp"
#include "evstore/event_store.hpp"
#include "evstore/workload.hpp"
#include "support.hpp"

using namespace evstore;

namespace {

const PackedLayout& ten_entry_layout() {
  static const PackedLayout l = [] {
    std::vector<ComponentEntry> e;
    for (int j = 0; j < 10; ++j) e.push_back({"k" + std::to_string(j), "T" + std::to_string(j)});
    return pack_layout(e);
  }();
  return l;
}

}  // namespace

TEST(CommonRegistry, RepeatedInternStoresOne) {
  CommonRegistry reg;
  const StaticIdFragment f{"BaBar", 12, 1};
  const auto id = common_intern(reg, f, ten_entry_layout());
  for (int i = 0; i < 100000; ++i) ASSERT_EQ(common_intern(reg, f, ten_entry_layout()), id);
  EXPECT_EQ(reg.size(), 1u);
}

TEST(CommonRegistry, OnePerRunOverWorkload) {
  WorkloadSpec spec;
  spec.event_count = 100000;
  spec.components_per_event = 10;
  spec.payload_len = 0;
  spec.bool_attrs = spec.int_attrs = spec.float_attrs = 0;
  spec.static_change_period = 1000;
  WorkloadGenerator gen(spec);
  CommonRegistry reg;
  std::set<std::pair<StaticIdFragment, std::string>> oracle;
  while (!gen.done()) {
    const auto ev = gen.next();
    const auto fragment = split_event_id(ev.id).first;
    const auto layout = ev.layout();
    common_intern(reg, fragment, layout);
    oracle.emplace(fragment, layout.packed_form());
  }
  EXPECT_EQ(oracle.size(), 100u);
  EXPECT_EQ(reg.size(), oracle.size());
}

TEST(CommonRegistry, TwoLayoutsTwoObjects) {
  CommonRegistry reg;
  const StaticIdFragment f{"BaBar", 1, 1};
  const auto a = common_intern(reg, f, pack_layout({{"a", "T"}}));
  const auto b = common_intern(reg, f, pack_layout({{"b", "T"}}));
  EXPECT_NE(a, b);
  EXPECT_EQ(reg.size(), 2u);
}

TEST(CommonRegistry, GetReturnsInternedContent) {
  CommonRegistry reg;
  const StaticIdFragment f{"CLEO", 4, 9};
  const auto id = common_intern(reg, f, ten_entry_layout());
  const auto obj = common_get(reg, id);
  EXPECT_EQ(obj.static_fragment, f);
  EXPECT_EQ(obj.layout, ten_entry_layout());
  EXPECT_EQ(obj.common_id, id);
  EXPECT_EQ(fnv1a64(common_content_key(f, ten_entry_layout())), id);
  try {
    common_get(reg, id + 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownCommonObject);
  }
}

TEST(CommonRegistry, HashCollisionDetected) {
  CommonRegistry reg([](std::string_view) -> std::uint64_t { return 1; });
  common_intern(reg, {"A", 0, 0}, {});
  try {
    common_intern(reg, {"B", 0, 0}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kHashCollision);
  }
}

TEST(CommonRegistry, EncodingRoundTrip) {
  CommonObject obj{{"BaBar", 3, 2}, ten_entry_layout(), 0, 0};
  obj.common_id = fnv1a64(common_content_key(obj.static_fragment, obj.layout));
  const auto back = decode_common(encode_common(obj));
  EXPECT_TRUE(back.same_content(obj));
  EXPECT_EQ(back.common_id, obj.common_id);
}

TEST(CommonStore, SurvivesReopen) {
  test::ScratchDir dir;
  const StaticIdFragment f{"BaBar", 77, 5};
  std::uint64_t id = 0;
  Oref ref;
  std::vector<std::byte> bytes;
  {
    auto store = EventStore::create(dir / "s");
    auto txn = store->begin();
    std::tie(id, ref) = txn.intern_common(f, ten_entry_layout());
    EXPECT_EQ(txn.intern_common(f, ten_entry_layout()).second, ref);
    txn.commit();
    bytes = store->read(ref).payload;
  }
  auto store = EventStore::open(dir / "s");
  const auto obj = store->common(id);
  EXPECT_EQ(obj.static_fragment, f);
  EXPECT_EQ(obj.layout, ten_entry_layout());
  EXPECT_EQ(store->read(ref).payload, bytes);
  EXPECT_EQ(encode_common(obj), bytes);
  EXPECT_EQ(store->common_count(), 1u);
  EXPECT_EQ(store->common_id_at(ref), id);
}
