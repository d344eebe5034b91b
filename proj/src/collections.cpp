#include "evstore/collections.hpp"

#include <algorithm>
#include <unordered_set>

#include "evstore/event_layout.hpp"

namespace evstore {

namespace {

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t start = 1;
  while (start <= path.size()) {
    auto end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    parts.push_back(path.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

bool component_match(std::string_view pat, std::string_view s) {
  // Iterative wildcard match with single-star backtracking.
  std::size_t p = 0, i = 0, star = std::string_view::npos, mark = 0;
  while (i < s.size()) {
    if (p < pat.size() && pat[p] == '*') {
      star = p++;
      mark = i;
    } else if (p < pat.size() && pat[p] == s[i]) {
      ++p;
      ++i;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      i = ++mark;
    } else {
      return false;
    }
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

bool match_parts(const std::vector<std::string_view>& pat, std::size_t pi, const std::vector<std::string_view>& name,
                 std::size_t ni) {
  if (pi == pat.size()) return ni == name.size();
  if (pat[pi] == "**") {
    for (std::size_t k = ni; k <= name.size(); ++k) {
      if (match_parts(pat, pi + 1, name, k)) return true;
    }
    return false;
  }
  return ni < name.size() && component_match(pat[pi], name[ni]) && match_parts(pat, pi + 1, name, ni + 1);
}

void validate_glob(std::string_view glob) {
  if (glob.empty() || glob.front() != '/') fail(ErrorCode::kBadPattern, "pattern must start with '/'");
  if (glob == "/") return;
  for (auto part : split_path(glob)) {
    if (part.empty()) fail(ErrorCode::kBadPattern, "empty component in pattern '" + std::string(glob) + "'");
    if (part.find("**") != std::string_view::npos && part != "**") {
      fail(ErrorCode::kBadPattern, "'**' must be a whole component in '" + std::string(glob) + "'");
    }
  }
}

}  // namespace

Collection create_collection(EventStore& store, const std::string& name, CollectionFormat format) {
  auto txn = store.begin();
  txn.create_collection(name, format);
  txn.commit();
  return store.collection(name);
}

void create_collection(WriteTxn& txn, const std::string& name, CollectionFormat format) {
  txn.create_collection(name, format);
}

void append_event(WriteTxn& txn, const std::string& collection, const Oref& event, bool owned) {
  txn.append_entry(collection, event, owned);
}

void set_access(EventStore& store, const std::string& path, AccessMode mode) { store.set_access_rule(path, mode); }

bool glob_match(std::string_view glob, std::string_view name) {
  if (glob == "/") return false;
  return match_parts(split_path(glob), 0, split_path(name), 0);
}

std::vector<std::string> resolve(const EventStore& store, const std::string& glob) {
  validate_glob(glob);
  std::vector<std::string> out;
  for (auto& name : store.collection_names()) {
    if (glob_match(glob, name)) out.push_back(std::move(name));
  }
  return out;
}

Tag entry_tag(const EventStore& store, const Collection& c, std::size_t index) {
  const auto& entry = c.entries.at(index);
  if (c.format == CollectionFormat::kV1) {
    if (!entry.tag) fail(ErrorCode::kCorruptRecord, "v1 collection entry without a tag");
    return store.read_tag(*entry.tag);
  }
  auto rec = store.read(entry.event);
  if (rec.type == RecordType::kEventV2) return store.read_tag(decode_event_v2(rec.payload).tag);
  if (rec.type == RecordType::kEventV1) {
    const auto tag_ref = store.v1_tag_ref(entry.event);
    if (!tag_ref) fail(ErrorCode::kCorruptRecord, "v1 event " + to_string(entry.event) + " has no collection tag");
    return store.read_tag(*tag_ref);
  }
  fail(ErrorCode::kCorruptRecord, "collection entry " + to_string(entry.event) + " is not an event");
}

SkimResult skim(EventStore& store, const std::vector<std::string>& inputs, const TagPredicate& predicate,
                const std::string& output, const SkimOptions& options) {
  std::vector<Collection> sources;
  sources.reserve(inputs.size());
  bool all_v1 = !inputs.empty();
  for (const auto& name : inputs) {
    sources.push_back(store.collection(name));
    all_v1 = all_v1 && sources.back().format == CollectionFormat::kV1;
  }
  const auto format = options.format.value_or(all_v1 ? CollectionFormat::kV1 : CollectionFormat::kV2);

  auto txn = store.begin();
  txn.create_collection(output, format);
  SkimResult result;
  std::unordered_set<Oref, OrefHash> seen;
  for (const auto& src : sources) {
    for (std::size_t i = 0; i < src.entries.size(); ++i) {
      const auto& ev = src.entries[i].event;
      if (!seen.insert(ev).second) continue;
      ++result.scanned;
      auto tag = entry_tag(store, src, i);
      if (!predicate.evaluate(tag, options.strict)) continue;
      ++result.selected;
      txn.append_entry(output, ev, false, std::move(tag));
    }
  }
  txn.commit();
  result.output = store.collection(output);
  return result;
}

}  // namespace evstore
