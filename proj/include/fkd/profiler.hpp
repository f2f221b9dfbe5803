#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fkd/discovery.hpp"
#include "fkd/gateway.hpp"
#include "fkd/prompts.hpp"

namespace fkd {

using CandidatePair = ColumnPair;
using CandidateSet = std::set<CandidatePair>;

/// Drops pairs whose logical types differ, pairs involving float, decimal or
/// boolean columns, and pairs whose referencing column has no non-null
/// values. With `keep_empty_tables`, referencing columns of 0-row tables are
/// exempt from the last rule, so their vacuous INDs reach validation on
/// schema evidence alone.
CandidateSet filter_by_rules(const IndSet& inds, const Database& db, bool keep_empty_tables = false);

/// Distinct referenced tables, sorted.
std::vector<std::string> referenced_tables(const CandidateSet& cands);

struct SelectedKey {
    std::string table;
    std::vector<std::string> columns; // in ordinal order
    std::string justification;
    std::string backend;
    bool fallback = false;    // heuristic used after a gateway failure
    bool no_ucc_mode = false; // candidates were the table's columns
    bool forced = false;      // single candidate, no call made
};
using SelectedKeySet = std::map<std::string, SelectedKey>;

void to_json(nlohmann::json& j, const SelectedKey& k);

/// Payload for a UniqueKeySelection request. Candidates are sorted by
/// (arity, max ordinal, column names) so the numbering is stable.
nlohmann::json unique_key_payload(const Table& table, const std::vector<MinUcc>& candidates, bool no_ucc_mode,
                                  std::size_t sample_rows);

/// Chooses one key for `table` among `uccs` (the table's MinUCCs). With no
/// MinUCCs every column becomes a single-column candidate. A lone candidate
/// is taken without a gateway call; a failed call falls back to the
/// heuristic and is flagged.
SelectedKey select_unique_key(const Table& table, const MinUccSet& uccs, Gateway& gateway,
                              const PromptOptions& prompt_options, std::string_view knowledge = {},
                              std::size_t sample_rows = 5);

/// Keeps pairs whose referenced column belongs to its table's chosen key.
/// Throws Error when a referenced table has no selected key.
CandidateSet prune_by_unique_keys(const CandidateSet& cands, const SelectedKeySet& keys);

struct StageCounts {
    std::size_t raw_pairs = 0; // C^2 over all columns
    std::size_t after_ind = 0;
    std::size_t after_rules = 0;
    std::size_t after_unique_key = 0;
    std::size_t table_baseline = 0; // n (n - 1)
};

void to_json(nlohmann::json& j, const StageCounts& c);

/// Fills the two baselines from the database; stage counts are copied.
StageCounts pruning_report(const Database& db, std::size_t after_ind, std::size_t after_rules,
                           std::size_t after_unique_key);

} // namespace fkd
