#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fkd/eval.hpp"

namespace fkd {

struct PlantedDb {
    Database db;
    GroundTruth truth;
};

/// Random database with `n_fks` planted references. Column 1 of every table
/// is a unique integer "id"; each planted column "<table>_id" draws its
/// values from the referenced table's ids, always pointing at an earlier
/// table so the truth graph is acyclic. Remaining columns are decoys:
/// partially overlapping integers, text, float, date and boolean.
/// Deterministic in `seed`. Throws Error when the references do not fit.
PlantedDb generate_planted_db(std::uint64_t seed, int n_tables, int n_cols, int n_rows, int n_fks,
                              std::string name = "planted");

struct StarDb {
    Database db;
    GroundTruth truth;
    std::vector<std::string> hubs;
};

/// 4 hub tables and 16 spoke tables of 8 columns each. Every spoke holds
/// two references to hub ids. Id ranges are disjoint across tables, and
/// spoke status values are contained in every hub's status column, so all
/// inclusion dependencies point into hubs.
StarDb generate_star_db(std::uint64_t seed, int n_rows = 200, std::string name = "star");

struct FuzzGraph {
    Database db;
    CandidateSet edges;
};

/// Random accepted-pair sets for verifier fuzzing: `n_edges` distinct pairs
/// among integer columns of `n_tables` small tables. Self-table pairs and
/// columns with several targets occur.
FuzzGraph generate_fuzz_graph(std::uint64_t seed, int n_tables, int n_cols, std::size_t n_edges);

/// Random small database for discovery tests: values come from narrow
/// ranges so inclusions and duplicates are common.
Database generate_random_db(std::uint64_t seed, int max_tables, int max_cols, int max_rows);
Table generate_random_table(std::uint64_t seed, int n_cols, int n_rows, std::string name = "t");

} // namespace fkd
