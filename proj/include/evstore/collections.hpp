#pragma once

// Hierarchically named collections: creation, membership, namespace access
// rules, glob resolution, and tag-predicate skims.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "evstore/event_store.hpp"
#include "evstore/predicate.hpp"

namespace evstore {

/// Creates and commits an empty collection. Throws NameExists, AccessDenied, BadName, WriterBusy.
Collection create_collection(EventStore& store, const std::string& name,
                             CollectionFormat format = CollectionFormat::kV2);
/// Within an open transaction; visible after commit.
void create_collection(WriteTxn& txn, const std::string& name, CollectionFormat format = CollectionFormat::kV2);

/// Throws UnknownCollection, AccessDenied, AlreadyOwned, UnknownRef.
void append_event(WriteTxn& txn, const std::string& collection, const Oref& event, bool owned);

/// Throws UnknownPath, WriterBusy.
void set_access(EventStore& store, const std::string& path, AccessMode mode);

/// Collection names matching `glob`, sorted. '*' matches within one path
/// component, '**' matches any number of components. Throws BadPattern.
std::vector<std::string> resolve(const EventStore& store, const std::string& glob);
bool glob_match(std::string_view glob, std::string_view name);

/// Tag of the event behind entry `index` of `c`.
Tag entry_tag(const EventStore& store, const Collection& c, std::size_t index);

struct SkimOptions {
  bool strict = false;
  /// Output format; defaults to v1 when every input is v1, else v2.
  std::optional<CollectionFormat> format;
};

struct SkimResult {
  Collection output;
  std::size_t scanned = 0;
  std::size_t selected = 0;
};

/// Commits a non-owning output collection holding every distinct input event
/// whose tag satisfies `predicate`, in input order.
/// Throws UnknownCollection, NameExists, AccessDenied, UnknownAttribute (strict).
SkimResult skim(EventStore& store, const std::vector<std::string>& inputs, const TagPredicate& predicate,
                const std::string& output, const SkimOptions& options = {});

}  // namespace evstore
