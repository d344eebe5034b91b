#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <thread>

#include "evstore/byte_model.hpp"
#include "evstore/tag.hpp"
#include "support.hpp"

using namespace evstore;

namespace {

std::uint64_t fnv_oracle(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Hand-rolled encoding: u64 id, LSB-first bool bits, i32 ints, f32 floats.
std::vector<std::byte> encode_oracle(std::uint64_t id, const std::vector<bool>& bools,
                                     const std::vector<std::int32_t>& ints, const std::vector<float>& floats) {
  std::vector<std::byte> out;
  auto raw = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out.insert(out.end(), b, b + n);
  };
  raw(&id, 8);
  std::vector<std::uint8_t> bits((bools.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bools.size(); ++i) {
    if (bools[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  raw(bits.data(), bits.size());
  for (auto v : ints) raw(&v, 4);
  for (auto v : floats) raw(&v, 4);
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

}  // namespace

TEST(Descriptor, EmptyListInternsOnce) {
  DescriptorRegistry reg;
  const auto a = descriptor_intern(reg, {});
  const auto b = descriptor_intern(reg, {});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, fnv_oracle(""));
  EXPECT_EQ(reg.size(), 1u);
}

TEST(Descriptor, ManyTagsOneDescriptor) {
  DescriptorRegistry reg;
  const std::vector<AttributeSpec> specs = {
      {"nTracks", AttributeKind::kInt}, {"isMuon", AttributeKind::kBool}, {"pT", AttributeKind::kFloat}};
  std::vector<Tag> tags;
  for (int i = 0; i < 10000; ++i) tags.push_back(Tag::create(reg, specs));
  EXPECT_EQ(reg.size(), 1u);
  for (const auto& t : tags) EXPECT_EQ(t.descriptor_ptr().get(), tags.front().descriptor_ptr().get());
}

TEST(Descriptor, KindChangeGivesNewId) {
  std::mt19937_64 rng(5);
  auto specs = test::random_specs(rng, "a", 500);
  auto changed = specs;
  changed[250].kind = static_cast<AttributeKind>((static_cast<int>(changed[250].kind) + 1) % 3);
  const auto c1 = canonical_encoding(specs);
  const auto c2 = canonical_encoding(changed);
  ASSERT_NE(c1, c2);
  DescriptorRegistry reg;
  EXPECT_NE(descriptor_intern(reg, specs), descriptor_intern(reg, changed));
  EXPECT_EQ(reg.size(), 2u);
}

TEST(Descriptor, CanonicalFormAndId) {
  auto d = TagDescriptor::build({{"n", AttributeKind::kInt}, {"m", AttributeKind::kBool}, {"x", AttributeKind::kFloat},
                                 {"t", AttributeKind::kInt, true}});
  EXPECT_EQ(d.canonical(), "n|I;m|B;x|F");
  EXPECT_EQ(d.id(), fnv_oracle("n|I;m|B;x|F"));
  EXPECT_FALSE(d.find("t"));
  const auto back = TagDescriptor::from_canonical(d.canonical());
  EXPECT_EQ(back.id(), d.id());
  EXPECT_EQ(back.specs(), d.specs());
}

TEST(Descriptor, Errors) {
  EXPECT_EQ(code_of([] { TagDescriptor::build({{"a", AttributeKind::kInt}, {"a", AttributeKind::kBool}}); }),
            ErrorCode::kDuplicateAttributeName);
  EXPECT_EQ(code_of([] { TagDescriptor::build({{"a;b", AttributeKind::kInt}}); }), ErrorCode::kIllegalCharacter);
  EXPECT_EQ(code_of([] { TagDescriptor::from_canonical("a|Q"); }), ErrorCode::kCorruptRecord);
  EXPECT_EQ(code_of([] { TagDescriptor::from_canonical("a|I;"); }), ErrorCode::kCorruptRecord);
}

TEST(Descriptor, HashCollisionDetected) {
  DescriptorRegistry reg([](std::string_view) -> std::uint64_t { return 7; });
  reg.intern({{"a", AttributeKind::kInt}});
  EXPECT_EQ(code_of([&] { reg.intern({{"b", AttributeKind::kInt}}); }), ErrorCode::kHashCollision);
  EXPECT_NO_THROW(reg.intern({{"a", AttributeKind::kInt}}));
}

TEST(Descriptor, MergeAttributeLists) {
  std::vector<AttributeSpec> a = {{"x", AttributeKind::kInt}, {"y", AttributeKind::kBool}};
  std::vector<AttributeSpec> b = {{"y", AttributeKind::kBool}, {"z", AttributeKind::kFloat}};
  const auto m = merge_attribute_lists(a, b);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[2].name, "z");
  std::vector<AttributeSpec> c = {{"x", AttributeKind::kFloat}};
  EXPECT_EQ(code_of([&] { merge_attribute_lists(a, c); }), ErrorCode::kKindConflict);
}

TEST(Descriptor, ConcurrentInterningSharesOneInstance) {
  DescriptorRegistry reg;
  std::mt19937_64 rng(9);
  std::vector<std::vector<AttributeSpec>> lists;
  for (int i = 0; i < 8; ++i) lists.push_back(test::random_specs(rng, "l" + std::to_string(i) + "_", 20));
  std::vector<std::vector<const TagDescriptor*>> seen(8);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 2000; ++i) seen[t].push_back(reg.intern(lists[(t + i) % lists.size()]).get());
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(reg.size(), lists.size());
  std::map<std::uint64_t, const TagDescriptor*> canon;
  for (const auto& v : seen) {
    for (const auto* d : v) {
      auto [it, fresh] = canon.emplace(d->id(), d);
      EXPECT_EQ(it->second, d);
    }
  }
}

TEST(Tag, SetGetBasics) {
  DescriptorRegistry reg;
  auto tag = Tag::create(reg, {{"isMuon", AttributeKind::kBool},
                               {"nTracks", AttributeKind::kInt},
                               {"pT", AttributeKind::kFloat},
                               {"calibPass", AttributeKind::kInt, true}});
  EXPECT_EQ(std::get<std::int32_t>(tag.get("nTracks")), 0);
  tag.set("isMuon", true);
  EXPECT_TRUE(std::get<bool>(tag.get("isMuon")));
  tag.set("pT", 3.5f);
  EXPECT_EQ(std::get<float>(tag.get("pT")), 3.5f);
  EXPECT_EQ(code_of([&] { tag.set("nTracks", 1.0f); }), ErrorCode::kKindMismatch);
  EXPECT_EQ(code_of([&] { tag.get("nowhere"); }), ErrorCode::kUnknownAttribute);
  EXPECT_EQ(code_of([&] { tag.set("nowhere", 1); }), ErrorCode::kUnknownAttribute);

  tag.set("calibPass", std::int32_t{3});
  EXPECT_EQ(std::get<std::int32_t>(tag.get("calibPass")), 3);
  const auto bytes = tag_persist(tag, reg);
  const auto back = Tag::decode(bytes, [&](std::uint64_t id) { return reg.find(id); });
  EXPECT_EQ(code_of([&] { back.get("calibPass"); }), ErrorCode::kUnknownAttribute);
  EXPECT_TRUE(std::get<bool>(back.get("isMuon")));
  EXPECT_EQ(std::get<float>(back.get("pT")), 3.5f);
}

TEST(Tag, PersistSizes) {
  const ModelConstants m;
  EXPECT_EQ(byte_model::tag(m, 0, 0, 0), 24u);
  EXPECT_EQ(byte_model::tag(m, 0, 500, 0), 2024u);
  DescriptorRegistry reg;
  auto empty = Tag::create(reg, {});
  EXPECT_EQ(tag_persist(empty, reg).size() + m.object_header, 24u);
  std::vector<AttributeSpec> ints;
  for (int i = 0; i < 500; ++i) ints.push_back({"i" + std::to_string(i), AttributeKind::kInt});
  auto big = Tag::create(reg, ints);
  EXPECT_EQ(tag_persist(big, reg).size() + m.object_header, 2024u);
}

TEST(Tag, TransientOnlyTagPersistsLikeEmpty) {
  DescriptorRegistry reg;
  auto empty = Tag::create(reg, {});
  auto transient = Tag::create(reg, {{"scratch", AttributeKind::kFloat, true}});
  transient.set("scratch", 1.25f);
  EXPECT_EQ(tag_persist(transient, reg), tag_persist(empty, reg));
}

TEST(Tag, PersistRequiresInternedDescriptor) {
  DescriptorRegistry reg;
  Tag t(test::make_descriptor({{"a", AttributeKind::kInt}}));
  EXPECT_EQ(code_of([&] { tag_persist(t, reg); }), ErrorCode::kUnknownDescriptor);
}

TEST(Tag, WidenedKeepsValuesAndZeroesTheRest) {
  auto narrow = test::make_descriptor({{"a", AttributeKind::kInt}, {"b", AttributeKind::kBool}});
  auto wide = test::make_descriptor(
      {{"z", AttributeKind::kFloat}, {"b", AttributeKind::kBool}, {"c", AttributeKind::kInt}, {"a", AttributeKind::kInt}});
  Tag t(narrow);
  t.set("a", std::int32_t{-4});
  t.set("b", true);
  const auto w = t.widened_to(wide);
  EXPECT_EQ(std::get<std::int32_t>(w.get("a")), -4);
  EXPECT_TRUE(std::get<bool>(w.get("b")));
  EXPECT_EQ(std::get<std::int32_t>(w.get("c")), 0);
  EXPECT_EQ(std::get<float>(w.get("z")), 0.0f);
}

// Random descriptors and values: get returns what set stored, and the
// persisted bytes match an independent encoder and decode back exactly.
TEST(TagProperty, SetGetPersistRoundTrip) {
  std::mt19937_64 rng(77);
  DescriptorRegistry reg;
  constexpr int kCases = 10000;
  for (int c = 0; c < kCases; ++c) {
    const auto specs = test::random_specs(rng, "a" + std::to_string(rng() % 50) + "_", rng() % 40);
    auto tag = Tag::create(reg, specs);
    std::vector<bool> bools;
    std::vector<std::int32_t> ints;
    std::vector<float> floats;
    std::vector<TagValue> values;
    for (const auto& s : specs) {
      const auto v = test::random_value(rng, s.kind);
      tag.set(s.name, v);
      values.push_back(v);
      if (s.kind == AttributeKind::kBool) bools.push_back(std::get<bool>(v));
      if (s.kind == AttributeKind::kInt) ints.push_back(std::get<std::int32_t>(v));
      if (s.kind == AttributeKind::kFloat) floats.push_back(std::get<float>(v));
    }
    for (std::size_t i = 0; i < specs.size(); ++i) ASSERT_TRUE(same_value(tag.get(specs[i].name), values[i]));

    const auto bytes = tag_persist(tag, reg);
    ASSERT_EQ(bytes, encode_oracle(fnv_oracle(canonical_encoding(specs)), bools, ints, floats));
    ASSERT_EQ(bytes.size(), tag.encoded_size());
    const auto back = Tag::decode(bytes, [&](std::uint64_t id) { return reg.find(id); });
    for (std::size_t i = 0; i < specs.size(); ++i) ASSERT_TRUE(same_value(back.get(specs[i].name), values[i]));
  }
}
