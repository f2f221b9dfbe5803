#pragma once

#include <set>
#include <string>
#include <vector>

#include "fkd/schema_store.hpp"

namespace fkd {

// Single-column inclusion dependency: distinct(referencing) ⊆ distinct(referenced).
using Ind = ColumnPair;
using IndSet = std::set<Ind>;

struct MinUcc {
    std::string table;
    std::vector<std::string> columns; // in ordinal order

    friend auto operator<=>(const MinUcc&, const MinUcc&) = default;
};
using MinUccSet = std::set<MinUcc>;

void to_json(nlohmann::json& j, const MinUcc& u);

inline constexpr int kDefaultMaxUccArity = 4;

/// Sort-merge discovery of all single-column INDs. Columns are grouped by
/// logical type; each group's sorted distinct-value lists are merged with
/// simultaneous cursors, and every referencing column keeps the set of
/// columns that contained all of its values so far. Empty referencing
/// columns yield vacuous INDs.
IndSet discover_single_column_inds(const Database& db);

/// Level-wise (apriori) search for minimal UCCs of arity <= max_arity.
/// Nulls compare equal. A 0-row table yields the empty set.
MinUccSet discover_min_uccs(const Table& table, int max_arity = kDefaultMaxUccArity);

/// Per-table discovery over the whole database, optionally in parallel.
MinUccSet discover_all_min_uccs(const Database& db, int max_arity = kDefaultMaxUccArity, int workers = 1);

/// True when the projection onto the given column indices has no duplicate
/// tuples (nulls compare equal).
bool is_unique_projection(const Table& table, const std::vector<std::size_t>& columns);

// Brute-force references with the same semantics as the discovery functions.
namespace oracle {

IndSet inds(const Database& db);
MinUccSet uccs(const Table& table, int max_arity = kDefaultMaxUccArity);

} // namespace oracle

} // namespace fkd
