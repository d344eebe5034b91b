#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evstore/bench.hpp"
#include "evstore/collections.hpp"
#include "evstore/event_layout.hpp"
#include "evstore/event_store.hpp"
#include "evstore/migrate.hpp"
#include "evstore/predicate.hpp"
#include "evstore/verify.hpp"
#include "evstore/workload.hpp"

namespace evstore::cli {

namespace fs = std::filesystem;

namespace {

/// A usage problem found after argument parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

CollectionFormat format_from_number(int n) {
  if (n == 1) return CollectionFormat::kV1;
  if (n == 2) return CollectionFormat::kV2;
  throw UsageError("--format must be 1 or 2");
}

const char* format_label(CollectionFormat f) { return f == CollectionFormat::kV1 ? "v1" : "v2"; }

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void print_event(std::ostream& out, const EventStore& store, const Collection& c, std::size_t index) {
  const auto& entry = c.entries[index];
  const auto ev = read_event(store, entry.event);
  out << "event " << index << '\n'
      << "  ref=" << to_string(entry.event) << '\n'
      << "  format=" << format_label(event_format(store, entry.event)) << '\n'
      << "  owned=" << (entry.owned ? "true" : "false") << '\n'
      << "  id.experiment_label=" << ev.id.experiment_label << '\n'
      << "  id.run_number=" << ev.id.run_number << '\n'
      << "  id.config_key=" << ev.id.config_key << '\n'
      << "  id.event_number=" << ev.id.event_number << '\n'
      << "  id.timestamp_us=" << ev.id.timestamp_us << '\n'
      << "  layout=" << ev.layout().packed_form() << '\n';
  for (std::size_t i = 0; i < ev.components.size(); ++i) {
    const auto& comp = ev.components[i];
    out << "  component." << i << '=' << comp.entry.key << ' ' << comp.entry.type_name << ' '
        << comp.payload.size() << " bytes\n";
  }
  auto values = entry_tag(store, c, index).persistent_values();
  std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [name, value] : values) out << "  tag." << name << '=' << format_value(value) << '\n';
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"evstore: event store with tagged collections"};
  app.require_subcommand(1);

  std::string store_dir;
  app.add_option("--store", store_dir, "Store directory")->envname("EVSTORE_DIR");

  // init
  auto* init = app.add_subcommand("init", "Create an empty store");
  StoreConfig init_config;
  init->add_option("--object-header-bytes", init_config.model.object_header, "Per-object header size in the byte model");
  init->add_option("--oref-bytes", init_config.model.oref, "Object reference size in the byte model");
  init->add_option("--segment-roll-bytes", init_config.segment_roll_bytes, "Segment size before rolling to a new file");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Generate a workload and store it");
  std::string ingest_spec, ingest_collection;
  int ingest_format = 2;
  std::uint64_t ingest_batch = 10000;
  ingest->add_option("--spec", ingest_spec, "Workload spec file")->required();
  ingest->add_option("--format", ingest_format, "Event layout, 1 or 2");
  ingest->add_option("--collection", ingest_collection, "Owning collection")->required();
  ingest->add_option("--batch", ingest_batch, "Events per commit");

  // ls
  auto* ls = app.add_subcommand("ls", "List collections matching a glob");
  std::string ls_glob = "/**";
  ls->add_option("glob", ls_glob, "Collection glob");

  // show
  auto* show = app.add_subcommand("show", "Print a collection's events");
  std::string show_name;
  std::optional<std::size_t> show_event;
  show->add_option("collection", show_name, "Collection name")->required();
  show->add_option("--event", show_event, "Entry index");

  // skim
  auto* skim_cmd = app.add_subcommand("skim", "Select events by tag predicate into a new collection");
  std::string skim_in, skim_where, skim_out;
  bool skim_strict = false;
  std::optional<int> skim_format;
  skim_cmd->add_option("--in", skim_in, "Input collection glob")->required();
  skim_cmd->add_option("--where", skim_where, "Tag predicate")->required();
  skim_cmd->add_option("--out", skim_out, "Output collection")->required();
  skim_cmd->add_flag("--strict", skim_strict, "Fail on attributes absent from a tag");
  skim_cmd->add_option("--format", skim_format, "Output collection format, 1 or 2");

  // migrate
  auto* migrate_cmd = app.add_subcommand("migrate", "Copy a v1 collection into the v2 layout");
  std::string migrate_in, migrate_out;
  migrate_cmd->add_option("--in", migrate_in, "v1 collection")->required();
  migrate_cmd->add_option("--out", migrate_out, "New v2 collection")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Print store statistics");

  // bench
  auto* bench = app.add_subcommand("bench", "Compare v1 and v2 footprints on a workload");
  std::string bench_spec, bench_json;
  bool bench_csv = false, bench_no_fsync = false;
  BenchOptions bench_options;
  bench->add_option("--spec", bench_spec, "Workload spec file")->required();
  bench->add_option("--json", bench_json, "Also write a JSON report (with timings) to this file");
  bench->add_flag("--csv", bench_csv, "Print CSV instead of key=value lines");
  bench->add_option("--batch", bench_options.batch_events, "Events per commit");
  bench->add_flag("--no-fsync", bench_no_fsync, "Skip fsync on commit");

  // verify
  auto* verify = app.add_subcommand("verify", "Check store integrity");

  // set-access
  auto* access = app.add_subcommand("set-access", "Set a namespace access rule");
  std::string access_path, access_mode;
  access->add_option("path", access_path, "Collection path prefix")->required();
  access->add_option("mode", access_mode, "read-only or read-write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "evstore: " << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    if (store_dir.empty()) throw UsageError("no store given (use --store or EVSTORE_DIR)");
    const fs::path dir = store_dir;

    if (init->parsed()) {
      EventStore::create(dir, init_config);
      out << "initialized " << dir.string() << '\n';
      return 0;
    }

    if (bench->parsed()) {
      const auto spec = load_workload_spec(bench_spec);
      bench_options.fsync = !bench_no_fsync;
      const auto result = run_comparison(spec, dir, bench_options);
      out << (bench_csv ? format_report_csv(result) : format_report_text(result));
      if (!bench_json.empty()) {
        std::ofstream j(bench_json);
        if (!(j << format_report_json(result))) throw UsageError("cannot write " + bench_json);
      }
      err << std::fixed << std::setprecision(3) << "ingest_seconds_v1=" << result.ingest_seconds_v1
          << " ingest_seconds_v2=" << result.ingest_seconds_v2 << " scan_seconds=" << result.scan_seconds << '\n';
      return result.consistent() ? 0 : 2;
    }

    if (verify->parsed()) {
      const auto report = verify_store(dir);
      out << format_verify_report(report);
      return report.ok() ? 0 : 2;
    }

    auto store = EventStore::open(dir);

    if (ingest->parsed()) {
      const auto format = format_from_number(ingest_format);
      const auto spec = load_workload_spec(ingest_spec);
      validate_collection_name(ingest_collection);
      if (auto existing = store->find_collection(ingest_collection); existing && existing->format != format) {
        throw UsageError(ingest_collection + " is a " + format_label(existing->format) + " collection");
      }
      const auto batch = std::max<std::uint64_t>(1, ingest_batch);
      WorkloadGenerator gen(spec);
      std::optional<WriteTxn> txn;
      txn.emplace(store->begin());
      if (format == CollectionFormat::kV2 && !txn->collection_exists(ingest_collection)) {
        txn->create_collection(ingest_collection, CollectionFormat::kV2);
      }
      while (!gen.done()) {
        const auto event = gen.next();
        if (format == CollectionFormat::kV1) {
          assemble_v1(*txn, event, ingest_collection);
        } else {
          append_event(*txn, ingest_collection, assemble_v2(*txn, event), true);
        }
        if (gen.produced() % batch == 0 || gen.done()) {
          txn->commit();
          if (!gen.done()) txn.emplace(store->begin());
        }
      }
      out << "ingested=" << gen.produced() << " collection=" << ingest_collection << " format=" << format_label(format)
          << '\n';
      return 0;
    }

    if (ls->parsed()) {
      for (const auto& name : resolve(*store, ls_glob)) {
        const auto c = store->collection(name);
        const auto owned = std::count_if(c.entries.begin(), c.entries.end(), [](const auto& e) { return e.owned; });
        out << name << ' ' << format_label(c.format) << " entries=" << c.entries.size() << " owned=" << owned
            << " access=" << access_mode_name(store->access(name)) << '\n';
      }
      return 0;
    }

    if (show->parsed()) {
      const auto c = store->collection(show_name);
      if (show_event) {
        if (*show_event >= c.entries.size()) {
          throw UsageError("--event " + std::to_string(*show_event) + " out of range (" +
                           std::to_string(c.entries.size()) + " entries)");
        }
        print_event(out, *store, c, *show_event);
        return 0;
      }
      out << "collection " << c.name << '\n'
          << "  format=" << format_label(c.format) << '\n'
          << "  entries=" << c.entries.size() << '\n';
      if (c.union_descriptor) {
        const auto u = store->descriptor(*c.union_descriptor);
        out << "  union_attributes=" << u->specs().size() << '\n';
      }
      for (std::size_t i = 0; i < c.entries.size(); ++i) print_event(out, *store, c, i);
      return 0;
    }

    if (skim_cmd->parsed()) {
      const auto inputs = resolve(*store, skim_in);
      if (inputs.empty()) throw Error(ErrorCode::kUnknownCollection, "no collection matches " + skim_in);
      const auto predicate = TagPredicate::parse(skim_where);
      SkimOptions options;
      options.strict = skim_strict;
      if (skim_format) options.format = format_from_number(*skim_format);
      const auto result = skim(*store, inputs, predicate, skim_out, options);
      out << "selected=" << result.selected << " scanned=" << result.scanned << " output=" << skim_out << '\n';
      return 0;
    }

    if (migrate_cmd->parsed()) {
      const auto result = migrate(*store, migrate_in, migrate_out);
      out << "migrated=" << result.mapping.size() << " output=" << migrate_out << '\n';
      return 0;
    }

    if (stats->parsed()) {
      const auto& m = store->model();
      out << "model.object_header_bytes=" << m.object_header << '\n'
          << "model.oref_bytes=" << m.oref << '\n'
          << "segment_roll_bytes=" << store->config().segment_roll_bytes << '\n';
      std::uint64_t bytes = 0;
      const auto marks = store->segments().watermarks();
      for (const auto& mark : marks) bytes += mark.watermark;
      out << "segments=" << marks.size() << '\n' << "segment_bytes=" << bytes << '\n';
      for (auto t : kAllRecordTypes) out << "records." << record_type_name(t) << '=' << store->record_count(t) << '\n';
      out << "events=" << store->event_count() << '\n'
          << "descriptors=" << store->descriptor_count() << '\n'
          << "commons=" << store->common_count() << '\n'
          << "collections=" << store->collection_names().size() << '\n';
      for (const auto& [path, mode] : store->access_rules()) {
        out << "access." << path << '=' << access_mode_name(mode) << '\n';
      }
      return 0;
    }

    if (access->parsed()) {
      set_access(*store, access_path, parse_access_mode(access_mode));
      out << "access " << access_path << '=' << access_mode << '\n';
      return 0;
    }
  } catch (const UsageError& e) {
    err << "evstore: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const Error& e) {
    err << "evstore: " << one_line(e.what()) << '\n';
    return is_data_error(e.code()) ? 2 : 1;
  } catch (const SimulatedCrash& e) {
    err << "evstore: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "evstore: " << one_line(e.what()) << '\n';
    return 2;
  }
  return 1;
}

}  // namespace evstore::cli
