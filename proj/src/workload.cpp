#include "evstore/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evstore {

namespace {

constexpr std::uint64_t kBaseTimestampUs = 1'000'000'000'000'000ull;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T v{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) {
    fail(ErrorCode::kBadSpec, "'" + std::string(key) + "' needs a non-negative integer, got '" + std::string(value) + "'");
  }
  return v;
}

std::string padded_name(char lead, std::uint32_t j, std::uint32_t len) {
  std::string digits = std::to_string(j);
  if (digits.size() + 1 > len) {
    fail(ErrorCode::kBadSpec, "name length " + std::to_string(len) + " too short for component " + std::to_string(j));
  }
  return std::string(1, lead) + std::string(len - 1 - digits.size(), '0') + digits;
}

}  // namespace

void WorkloadSpec::validate() const {
  if (event_count == 0) fail(ErrorCode::kBadSpec, "event_count must be positive");
  if (key_len == 0 || key_len > 255) fail(ErrorCode::kBadSpec, "key_len must be in 1..255");
  if (type_len == 0 || type_len > 255) fail(ErrorCode::kBadSpec, "type_len must be in 1..255");
  if (components_per_event > 100000) fail(ErrorCode::kBadSpec, "components_per_event too large");
  if (payload_len > (16u << 20)) fail(ErrorCode::kBadSpec, "payload_len too large");
  if (descriptor_pool == 0) fail(ErrorCode::kBadSpec, "descriptor_pool must be positive");
  if (static_change_period && *static_change_period == 0) {
    fail(ErrorCode::kBadSpec, "static_change_period must be positive or inf");
  }
  if (std::uint64_t{bool_attrs} + int_attrs + float_attrs > 1'000'000) {
    fail(ErrorCode::kBadSpec, "too many tag attributes");
  }
  if (!is_valid_name(experiment_label)) fail(ErrorCode::kBadSpec, "bad experiment_label");
  if (components_per_event > 0) {
    (void)padded_name('k', components_per_event - 1, key_len);
    (void)padded_name('T', components_per_event - 1, type_len);
  }
}

std::uint64_t WorkloadSpec::distinct_static_fragments() const {
  if (!static_change_period) return 1;
  return (event_count + *static_change_period - 1) / *static_change_period;
}

WorkloadSpec parse_workload_spec(std::string_view text) {
  WorkloadSpec spec;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kBadSpec, "line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "event_count") spec.event_count = parse_number<std::uint64_t>(key, value);
    else if (key == "components_per_event") spec.components_per_event = parse_number<std::uint32_t>(key, value);
    else if (key == "key_len") spec.key_len = parse_number<std::uint32_t>(key, value);
    else if (key == "type_len") spec.type_len = parse_number<std::uint32_t>(key, value);
    else if (key == "payload_len") spec.payload_len = parse_number<std::uint32_t>(key, value);
    else if (key == "bool_attrs") spec.bool_attrs = parse_number<std::uint32_t>(key, value);
    else if (key == "int_attrs") spec.int_attrs = parse_number<std::uint32_t>(key, value);
    else if (key == "float_attrs") spec.float_attrs = parse_number<std::uint32_t>(key, value);
    else if (key == "static_change_period") {
      if (value == "inf") spec.static_change_period.reset();
      else spec.static_change_period = parse_number<std::uint64_t>(key, value);
    } else if (key == "descriptor_pool") spec.descriptor_pool = parse_number<std::uint32_t>(key, value);
    else if (key == "seed") spec.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "experiment_label") spec.experiment_label = std::string(value);
    else if (key == "config_key") spec.config_key = parse_number<std::uint32_t>(key, value);
    else fail(ErrorCode::kBadSpec, "line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
  }
  spec.validate();
  return spec;
}

WorkloadSpec load_workload_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kBadSpec, "cannot read workload spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_workload_spec(ss.str());
}

std::string format_workload_spec(const WorkloadSpec& spec) {
  std::ostringstream out;
  out << "event_count=" << spec.event_count << '\n'
      << "components_per_event=" << spec.components_per_event << '\n'
      << "key_len=" << spec.key_len << '\n'
      << "type_len=" << spec.type_len << '\n'
      << "payload_len=" << spec.payload_len << '\n'
      << "bool_attrs=" << spec.bool_attrs << '\n'
      << "int_attrs=" << spec.int_attrs << '\n'
      << "float_attrs=" << spec.float_attrs << '\n'
      << "static_change_period="
      << (spec.static_change_period ? std::to_string(*spec.static_change_period) : std::string("inf")) << '\n'
      << "descriptor_pool=" << spec.descriptor_pool << '\n'
      << "seed=" << spec.seed << '\n'
      << "experiment_label=" << spec.experiment_label << '\n'
      << "config_key=" << spec.config_key << '\n';
  return out.str();
}

WorkloadSpec w0_spec() {
  WorkloadSpec s;
  s.event_count = 100000;
  s.components_per_event = 10;
  s.key_len = 8;
  s.type_len = 8;
  s.payload_len = 256;
  s.bool_attrs = 20;
  s.int_attrs = 400;
  s.float_attrs = 80;
  s.static_change_period = 1000;
  s.descriptor_pool = 4;
  s.seed = 42;
  return s;
}

std::vector<AttributeSpec> pool_attributes(const WorkloadSpec& spec, std::uint32_t d) {
  std::vector<AttributeSpec> out;
  out.reserve(spec.bool_attrs + spec.int_attrs + spec.float_attrs);
  const std::string prefix = "d" + std::to_string(d) + ".";
  for (std::uint32_t k = 0; k < spec.bool_attrs; ++k) out.push_back({prefix + "b" + std::to_string(k), AttributeKind::kBool});
  for (std::uint32_t k = 0; k < spec.int_attrs; ++k) out.push_back({prefix + "i" + std::to_string(k), AttributeKind::kInt});
  for (std::uint32_t k = 0; k < spec.float_attrs; ++k) {
    out.push_back({prefix + "f" + std::to_string(k), AttributeKind::kFloat});
  }
  return out;
}

std::string component_key(const WorkloadSpec& spec, std::uint32_t j) { return padded_name('k', j, spec.key_len); }
std::string component_type(const WorkloadSpec& spec, std::uint32_t j) { return padded_name('T', j, spec.type_len); }

WorkloadGenerator::WorkloadGenerator(const WorkloadSpec& spec) : spec_(spec), rng_(spec.seed) {
  spec_.validate();
  for (std::uint32_t d = 0; d < spec_.descriptor_pool; ++d) {
    pool_.push_back(std::make_shared<const TagDescriptor>(TagDescriptor::build(pool_attributes(spec_, d))));
  }
  for (std::uint32_t j = 0; j < spec_.components_per_event; ++j) {
    entries_.push_back({component_key(spec_, j), component_type(spec_, j)});
  }
}

TransientEvent WorkloadGenerator::next() {
  if (done()) fail(ErrorCode::kInvalidArgument, "workload exhausted");
  const std::uint64_t i = next_++;
  TransientEvent ev;
  ev.id.experiment_label = spec_.experiment_label;
  ev.id.run_number = spec_.static_change_period ? static_cast<std::uint32_t>(i / *spec_.static_change_period) : 0;
  ev.id.config_key = spec_.config_key;
  ev.id.event_number = i;
  ev.id.timestamp_us = kBaseTimestampUs + i * 1000 + rng_() % 1000;

  ev.components.reserve(entries_.size());
  for (const auto& entry : entries_) {
    Component c{entry, std::vector<std::byte>(spec_.payload_len)};
    for (std::size_t b = 0; b < c.payload.size(); b += 8) {
      const std::uint64_t word = rng_();
      const std::size_t n = std::min<std::size_t>(8, c.payload.size() - b);
      std::memcpy(c.payload.data() + b, &word, n);
    }
    ev.components.push_back(std::move(c));
  }

  ev.tag = Tag(pool_[i % pool_.size()]);
  std::uint64_t bits = 0;
  for (std::uint32_t k = 0; k < spec_.bool_attrs; ++k) {
    if (k % 64 == 0) bits = rng_();
    ev.tag.set_slot({AttributeKind::kBool, k}, ((bits >> (k % 64)) & 1) != 0);
  }
  for (std::uint32_t k = 0; k < spec_.int_attrs; ++k) {
    ev.tag.set_slot({AttributeKind::kInt, k}, static_cast<std::int32_t>(rng_() % 100));
  }
  for (std::uint32_t k = 0; k < spec_.float_attrs; ++k) {
    ev.tag.set_slot({AttributeKind::kFloat, k}, static_cast<float>(rng_() >> 40) * 0x1.0p-24f);
  }
  return ev;
}

std::vector<TransientEvent> generate_workload(const WorkloadSpec& spec) {
  WorkloadGenerator gen(spec);
  std::vector<TransientEvent> out;
  out.reserve(spec.event_count);
  while (!gen.done()) out.push_back(gen.next());
  return out;
}

}  // namespace evstore
