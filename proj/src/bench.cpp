#include "evstore/bench.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "evstore/common_store.hpp"
#include "evstore/event_layout.hpp"
#include "evstore/event_store.hpp"

namespace evstore {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void finish(VersionReport& r) {
  r.nav_bytes_per_event = r.events ? static_cast<double>(r.nav_bytes_total) / static_cast<double>(r.events) : 0.0;
}

/// Live accounting for the v2 layout.
struct LiveV2 {
  explicit LiveV2(const ModelConstants& model) : m(model) {}

  ModelConstants m;
  std::uint64_t direct = 0;
  std::uint64_t shared = 0;
  std::uint64_t components = 0;
  std::uint64_t events = 0;
  std::unordered_set<std::string> commons;
  std::unordered_set<std::uint64_t> descriptors;

  void add(const TransientEvent& e) {
    const auto& d = e.tag.descriptor();
    direct += byte_model::event_v2(m, e.components.size()) +
              byte_model::tag(m, d.count(AttributeKind::kBool), d.count(AttributeKind::kInt),
                              d.count(AttributeKind::kFloat));
    const auto layout = e.layout();
    const auto [fragment, dynamic] = split_event_id(e.id);
    (void)dynamic;
    if (commons.insert(common_content_key(fragment, layout)).second) {
      shared += byte_model::common(m, fragment.experiment_label.size(), layout.packed_form().size());
    }
    descriptors.insert(d.id());
    components += e.components.size();
    ++events;
  }

  VersionReport report() const {
    VersionReport r;
    r.events = events;
    r.nav_bytes_total = direct + shared;
    r.object_count = 2 * events + components + commons.size() + descriptors.size();
    r.distinct_descriptors = descriptors.size();
    r.distinct_commons = commons.size();
    finish(r);
    return r;
  }
};

/// Live accounting for the v1 layout with one collection committed in batches.
struct LiveV1 {
  explicit LiveV1(const ModelConstants& model) : m(model) {}

  ModelConstants m;
  std::uint64_t direct = 0;
  std::uint64_t events = 0;
  std::uint64_t objects = 0;
  std::vector<AttributeSpec> union_specs;
  std::unordered_set<std::uint64_t> merged;
  std::optional<std::uint64_t> committed_union;
  std::uint64_t committed_entries = 0;
  std::uint64_t batch_entries = 0;
  std::set<std::uint64_t> written_unions;
  DescriptorPtr final_union;

  void add(const TransientEvent& e) {
    std::uint64_t bytes = byte_model::event_v1(m, e.components.size()) +
                          byte_model::id_object(m, e.id.experiment_label.size());
    for (const auto& c : e.components) bytes += byte_model::header(m, c.entry.key.size(), c.entry.type_name.size());
    direct += bytes;
    objects += 2 + 2 * e.components.size();
    const auto& d = e.tag.descriptor();
    if (merged.insert(d.id()).second) union_specs = merge_attribute_lists(union_specs, d.specs());
    ++events;
    ++batch_entries;
  }

  void commit_batch() {
    if (batch_entries == 0) return;
    auto u = std::make_shared<const TagDescriptor>(TagDescriptor::build(union_specs));
    if (committed_union && *committed_union != u->id()) objects += committed_entries;
    if (written_unions.insert(u->id()).second) objects += 1;
    objects += batch_entries;
    committed_union = u->id();
    committed_entries += batch_entries;
    batch_entries = 0;
    final_union = u;
  }

  VersionReport report() const {
    VersionReport r;
    r.events = events;
    r.object_count = objects;
    r.distinct_descriptors = written_unions.size();
    r.distinct_commons = 0;
    r.nav_bytes_total = direct;
    if (final_union) {
      const auto& u = *final_union;
      r.nav_bytes_total += events * byte_model::tag(m, u.count(AttributeKind::kBool), u.count(AttributeKind::kInt),
                                                    u.count(AttributeKind::kFloat));
      r.nav_bytes_total += byte_model::descriptor(m, u.canonical().size());
    }
    finish(r);
    return r;
  }
};

VersionReport scan_version(const fs::path& dir, const char* collection) {
  auto store = EventStore::open(dir);
  const auto c = store->collection(collection);
  VersionReport r;
  std::map<std::pair<RecordType, std::uint64_t>, std::uint64_t> shared;
  std::uint64_t direct = 0;
  for (const auto& entry : c.entries) {
    const auto fp = nav_footprint(*store, entry.event);
    direct += fp.direct_bytes;
    for (const auto& s : fp.shares) shared[{s.type, s.object_id}] = s.bytes;
    ++r.events;
  }
  r.nav_bytes_total = direct;
  for (const auto& [key, bytes] : shared) r.nav_bytes_total += bytes;
  for (auto t : kAllRecordTypes) {
    if (t != RecordType::kCollection) r.object_count += store->record_count(t);
  }
  r.distinct_descriptors = store->descriptor_count();
  r.distinct_commons = store->common_count();
  finish(r);
  return r;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::ordered_json version_json(const VersionReport& r) {
  return {{"events", r.events},
          {"nav_bytes_total", r.nav_bytes_total},
          {"nav_bytes_per_event", r.nav_bytes_per_event},
          {"object_count", r.object_count},
          {"distinct_descriptors", r.distinct_descriptors},
          {"distinct_commons", r.distinct_commons}};
}

}  // namespace

double reduction_ratio(const VersionReport& v1, const VersionReport& v2) {
  if (v1.nav_bytes_per_event <= 0) return 0.0;
  return 1.0 - v2.nav_bytes_per_event / v1.nav_bytes_per_event;
}

BenchResult run_comparison(const WorkloadSpec& spec, const fs::path& dir, const BenchOptions& options) {
  spec.validate();
  BenchResult result;
  result.spec = spec;
  const auto batch = std::max<std::uint64_t>(1, options.batch_events);

  StoreOptions sopts;
  sopts.fsync = options.fsync;
  StoreConfig config;
  config.model = options.model;
  auto v1 = EventStore::create(dir / "v1", config, sopts);
  auto v2 = EventStore::create(dir / "v2", config, sopts);

  LiveV1 live1(options.model);
  LiveV2 live2(options.model);
  WorkloadGenerator gen(spec);

  Clock::duration t1{}, t2{};
  std::optional<WriteTxn> txn1, txn2;
  txn1.emplace(v1->begin());
  txn2.emplace(v2->begin());
  txn2->create_collection(kBenchV2Collection, CollectionFormat::kV2);
  while (!gen.done()) {
    const auto event = gen.next();
    auto t0 = Clock::now();
    assemble_v1(*txn1, event, kBenchV1Collection);
    auto t_mid = Clock::now();
    const auto ref = assemble_v2(*txn2, event);
    txn2->append_entry(kBenchV2Collection, ref, true, Tag());
    t1 += t_mid - t0;
    t2 += Clock::now() - t_mid;
    live1.add(event);
    live2.add(event);
    if (gen.produced() % batch == 0 || gen.done()) {
      t0 = Clock::now();
      txn1->commit();
      live1.commit_batch();
      t_mid = Clock::now();
      txn2->commit();
      t1 += t_mid - t0;
      t2 += Clock::now() - t_mid;
      if (!gen.done()) {
        txn1.emplace(v1->begin());
        txn2.emplace(v2->begin());
      }
    }
  }
  result.ingest_seconds_v1 = std::chrono::duration<double>(t1).count();
  result.ingest_seconds_v2 = std::chrono::duration<double>(t2).count();
  v1.reset();
  v2.reset();

  result.live.model = options.model;
  result.live.v1 = live1.report();
  result.live.v2 = live2.report();
  result.live.reduction_ratio = reduction_ratio(result.live.v1, result.live.v2);

  const auto t0 = Clock::now();
  result.cold = scan_comparison(dir);
  result.scan_seconds = seconds_since(t0);
  return result;
}

FootprintReport scan_comparison(const fs::path& dir) {
  FootprintReport r;
  r.v1 = scan_version(dir / "v1", kBenchV1Collection);
  r.v2 = scan_version(dir / "v2", kBenchV2Collection);
  r.model = EventStore::open(dir / "v2")->model();
  r.reduction_ratio = reduction_ratio(r.v1, r.v2);
  return r;
}

std::string format_report_text(const BenchResult& r) {
  std::ostringstream out;
  const auto& m = r.live.model;
  out << "model.object_header_bytes=" << m.object_header << '\n'
      << "model.oref_bytes=" << m.oref << '\n'
      << "model.u32_bytes=" << m.u32 << '\n'
      << "model.u64_bytes=" << m.u64 << '\n'
      << "model.string_prefix_bytes=" << m.string_prefix << '\n';
  std::istringstream spec(format_workload_spec(r.spec));
  for (std::string line; std::getline(spec, line);) out << "workload." << line << '\n';
  for (const auto& [name, v] : {std::pair{"v1", r.live.v1}, std::pair{"v2", r.live.v2}}) {
    out << name << ".events=" << v.events << '\n'
        << name << ".nav_bytes_total=" << v.nav_bytes_total << '\n'
        << name << ".nav_bytes_per_event=" << fixed(v.nav_bytes_per_event, 4) << '\n'
        << name << ".object_count=" << v.object_count << '\n'
        << name << ".distinct_descriptors=" << v.distinct_descriptors << '\n'
        << name << ".distinct_commons=" << v.distinct_commons << '\n';
  }
  out << "reduction_ratio=" << fixed(r.live.reduction_ratio, 6) << '\n'
      << "cold_scan_match=" << (r.consistent() ? "true" : "false") << '\n';
  return out.str();
}

std::string format_report_json(const BenchResult& r) {
  nlohmann::ordered_json j;
  const auto& m = r.live.model;
  j["model"] = {{"object_header_bytes", m.object_header},
                {"oref_bytes", m.oref},
                {"u32_bytes", m.u32},
                {"u64_bytes", m.u64},
                {"string_prefix_bytes", m.string_prefix}};
  j["workload"] = {{"event_count", r.spec.event_count},
                   {"components_per_event", r.spec.components_per_event},
                   {"key_len", r.spec.key_len},
                   {"type_len", r.spec.type_len},
                   {"payload_len", r.spec.payload_len},
                   {"bool_attrs", r.spec.bool_attrs},
                   {"int_attrs", r.spec.int_attrs},
                   {"float_attrs", r.spec.float_attrs},
                   {"static_change_period", r.spec.static_change_period
                                                ? nlohmann::ordered_json(*r.spec.static_change_period)
                                                : nlohmann::ordered_json("inf")},
                   {"descriptor_pool", r.spec.descriptor_pool},
                   {"seed", r.spec.seed},
                   {"experiment_label", r.spec.experiment_label},
                   {"config_key", r.spec.config_key}};
  j["v1"] = version_json(r.live.v1);
  j["v2"] = version_json(r.live.v2);
  j["reduction_ratio"] = r.live.reduction_ratio;
  j["cold_scan_match"] = r.consistent();
  j["timings"] = {{"ingest_seconds_v1", r.ingest_seconds_v1},
                  {"ingest_seconds_v2", r.ingest_seconds_v2},
                  {"scan_seconds", r.scan_seconds}};
  return j.dump(2) + "\n";
}

std::string format_report_csv(const BenchResult& r) {
  std::ostringstream out;
  out << "version,events,nav_bytes_total,nav_bytes_per_event,object_count,distinct_descriptors,distinct_commons\n";
  for (const auto& [name, v] : {std::pair{"v1", r.live.v1}, std::pair{"v2", r.live.v2}}) {
    out << name << ',' << v.events << ',' << v.nav_bytes_total << ',' << fixed(v.nav_bytes_per_event, 4) << ','
        << v.object_count << ',' << v.distinct_descriptors << ',' << v.distinct_commons << '\n';
  }
  return out.str();
}

}  // namespace evstore
