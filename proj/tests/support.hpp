#pragma once

// Shared test helpers: scratch directories and random event builders.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "evstore/event.hpp"
#include "evstore/tag.hpp"

namespace evstore::test {

class ScratchDir {
 public:
  ScratchDir() {
    auto tmpl = (std::filesystem::temp_directory_path() / "evstore-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::byte> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<std::byte>(raw[i]);
  return out;
}

/// Every regular file under `dir`, relative path -> bytes.
inline std::map<std::string, std::vector<std::byte>> snapshot_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::vector<std::byte>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

inline void flip_byte(const std::filesystem::path& file, std::uint64_t offset) {
  std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ 0x5a));
}

inline std::string random_name(std::mt19937_64& rng, std::size_t min_len = 1, std::size_t max_len = 12) {
  static constexpr char kChars[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-/:";
  const std::size_t len = min_len + rng() % (max_len - min_len + 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += kChars[rng() % (sizeof kChars - 1)];
  return s;
}

/// Distinct attribute specs named `prefix`0.., random kinds.
inline std::vector<AttributeSpec> random_specs(std::mt19937_64& rng, const std::string& prefix, std::size_t n) {
  std::vector<AttributeSpec> specs;
  for (std::size_t i = 0; i < n; ++i) {
    specs.push_back({prefix + std::to_string(i), static_cast<AttributeKind>(rng() % 3)});
  }
  return specs;
}

inline TagValue random_value(std::mt19937_64& rng, AttributeKind kind) {
  switch (kind) {
    case AttributeKind::kBool: return (rng() & 1) != 0;
    case AttributeKind::kInt: return static_cast<std::int32_t>(rng() % 200) - 100;
    case AttributeKind::kFloat: return static_cast<float>(static_cast<std::int64_t>(rng() % 20001) - 10000) / 64.0f;
  }
  return false;
}

inline void fill_tag(std::mt19937_64& rng, Tag& tag) {
  for (const auto& s : tag.descriptor().specs()) tag.set(s.name, random_value(rng, s.kind));
}

/// Random event with a unique event number `n`.
inline TransientEvent random_event(std::mt19937_64& rng, std::uint64_t n, const DescriptorPtr& descriptor,
                                   std::size_t max_components = 4) {
  TransientEvent ev;
  ev.id.experiment_label = "Exp" + std::to_string(rng() % 3);
  ev.id.run_number = static_cast<std::uint32_t>(rng() % 4);
  ev.id.config_key = static_cast<std::uint32_t>(rng() % 2);
  ev.id.event_number = n;
  ev.id.timestamp_us = rng();
  const std::size_t nc = rng() % (max_components + 1);
  for (std::size_t j = 0; j < nc; ++j) {
    Component c;
    c.entry = {"key" + std::to_string(j), "Type" + std::to_string(rng() % 3)};
    c.payload.resize(rng() % 64);
    for (auto& b : c.payload) b = static_cast<std::byte>(rng());
    ev.components.push_back(std::move(c));
  }
  ev.tag = Tag(descriptor);
  fill_tag(rng, ev.tag);
  return ev;
}

inline DescriptorPtr make_descriptor(std::vector<AttributeSpec> specs) {
  return std::make_shared<const TagDescriptor>(TagDescriptor::build(std::move(specs)));
}

}  // namespace evstore::test
