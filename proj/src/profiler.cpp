#include "fkd/profiler.hpp"

#include <algorithm>

#include "fkd/errors.hpp"

namespace fkd {

using nlohmann::json;

namespace {

bool key_eligible(LogicalType t) {
    return t != LogicalType::Float && t != LogicalType::Decimal && t != LogicalType::Boolean;
}

int max_ordinal(const Table& table, const MinUcc& u) {
    int m = 0;
    for (const auto& c : u.columns) {
        m = std::max(m, table.find_column(c)->ordinal);
    }
    return m;
}

} // namespace

CandidateSet filter_by_rules(const IndSet& inds, const Database& db, bool keep_empty_tables) {
    CandidateSet out;
    for (const auto& ind : inds) {
        const auto& f = db.column(ind.referencing);
        const auto& p = db.column(ind.referenced);
        if (f.type != p.type || !key_eligible(f.type)) {
            continue;
        }
        if (non_null_count(f) == 0) {
            const bool empty_table = db.table(ind.referencing.table).row_count == 0;
            if (!(keep_empty_tables && empty_table)) {
                continue;
            }
        }
        out.insert(ind);
    }
    return out;
}

std::vector<std::string> referenced_tables(const CandidateSet& cands) {
    std::set<std::string> names;
    for (const auto& c : cands) {
        names.insert(c.referenced.table);
    }
    return {names.begin(), names.end()};
}

void to_json(json& j, const SelectedKey& k) {
    j = {{"table", k.table},         {"columns", k.columns},         {"justification", k.justification},
         {"backend", k.backend},     {"fallback", k.fallback},       {"no_ucc_mode", k.no_ucc_mode},
         {"forced", k.forced}};
}

json unique_key_payload(const Table& table, const std::vector<MinUcc>& candidates, bool no_ucc_mode,
                        std::size_t sample_rows) {
    json cands = json::array();
    const auto rows = std::min(sample_rows, table.row_count);
    for (const auto& u : candidates) {
        json cols = json::array();
        std::vector<const Column*> columns;
        for (const auto& name : u.columns) {
            const auto* col = table.find_column(name);
            if (!col) {
                throw ResolveError("unknown column " + table.name + "." + name);
            }
            columns.push_back(col);
            cols.push_back(column_stats(table, *col));
        }
        json samples = json::array();
        for (std::size_t r = 0; r < rows; ++r) {
            json row = json::array();
            for (const auto* col : columns) {
                row.push_back(col->values[r]);
            }
            samples.push_back(std::move(row));
        }
        cands.push_back({{"columns", std::move(cols)}, {"samples", std::move(samples)}});
    }
    return {{"table", table.name},
            {"row_count", table.row_count},
            {"no_ucc_mode", no_ucc_mode},
            {"candidates", std::move(cands)}};
}

SelectedKey select_unique_key(const Table& table, const MinUccSet& uccs, Gateway& gateway,
                              const PromptOptions& prompt_options, std::string_view knowledge,
                              std::size_t sample_rows) {
    std::vector<MinUcc> cands;
    for (const auto& u : uccs) {
        if (u.table == table.name) {
            cands.push_back(u);
        }
    }
    SelectedKey key;
    key.table = table.name;
    key.no_ucc_mode = cands.empty();
    if (key.no_ucc_mode) {
        for (const auto& c : table.columns) {
            cands.push_back({table.name, {c.name}});
        }
    }
    if (cands.empty()) {
        throw Error("table " + table.name + " has no columns to choose a key from");
    }
    std::sort(cands.begin(), cands.end(), [&](const MinUcc& a, const MinUcc& b) {
        return std::forward_as_tuple(a.columns.size(), max_ordinal(table, a), a.columns) <
               std::forward_as_tuple(b.columns.size(), max_ordinal(table, b), b.columns);
    });
    if (cands.size() == 1) {
        key.columns = cands.front().columns;
        key.justification = "only candidate";
        key.backend = "none";
        key.forced = true;
        return key;
    }
    const auto payload = unique_key_payload(table, cands, key.no_ucc_mode, sample_rows);
    CompletionRequest request{PromptKind::UniqueKeySelection, table.name,
                              render_prompt(PromptKind::UniqueKeySelection, payload, prompt_options, knowledge),
                              payload, cands.size()};
    std::size_t chosen = 0;
    try {
        auto response = gateway.complete(request);
        const auto& choice = std::get<UniqueKeyChoice>(response.decision);
        chosen = choice.chosen_index;
        key.justification = choice.reason;
        key.backend = response.backend;
    } catch (const Error& e) {
        chosen = heuristic::choose_unique_key(payload);
        key.justification = std::string("heuristic fallback: ") + e.what();
        key.backend = "heuristic";
        key.fallback = true;
    }
    key.columns = cands.at(chosen).columns;
    return key;
}

CandidateSet prune_by_unique_keys(const CandidateSet& cands, const SelectedKeySet& keys) {
    CandidateSet out;
    for (const auto& c : cands) {
        auto it = keys.find(c.referenced.table);
        if (it == keys.end()) {
            throw Error("no unique key selected for referenced table " + c.referenced.table);
        }
        const auto& cols = it->second.columns;
        if (std::find(cols.begin(), cols.end(), c.referenced.column) != cols.end()) {
            out.insert(c);
        }
    }
    return out;
}

void to_json(json& j, const StageCounts& c) {
    j = {{"raw_pairs", c.raw_pairs},
         {"after_ind", c.after_ind},
         {"after_rules", c.after_rules},
         {"after_unique_key", c.after_unique_key},
         {"table_baseline", c.table_baseline}};
}

StageCounts pruning_report(const Database& db, std::size_t after_ind, std::size_t after_rules,
                           std::size_t after_unique_key) {
    const auto cols = db.column_count();
    const auto n = db.tables.size();
    return {cols * cols, after_ind, after_rules, after_unique_key, n == 0 ? 0 : n * (n - 1)};
}

} // namespace fkd
