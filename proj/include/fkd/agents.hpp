#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fkd/gateway.hpp"
#include "fkd/profiler.hpp"
#include "fkd/prompts.hpp"

namespace fkd {

struct DomainKnowledge {
    std::string domain;
    std::string entity_notes;
    std::string backend;
    bool error = false; // the call failed; knowledge left empty

    bool empty() const { return domain.empty() && entity_notes.empty(); }
    /// The block injected into downstream prompts.
    std::string text() const;
};

void to_json(nlohmann::json& j, const DomainKnowledge& k);

struct TableSample {
    std::string table;
    std::vector<std::string> headers;
    std::vector<Row> rows;
};

struct PairEvidence {
    CandidatePair pair;
    ColumnStats referencing;
    ColumnStats referenced;
    std::optional<double> coverage_ratio;     // undefined when c_f has no values
    std::optional<double> table_size_ratio;   // undefined when either table is empty
    std::optional<double> out_of_range_ratio; // undefined when c_f has no values
    TableSample referencing_sample;
    TableSample referenced_sample;
};

void to_json(nlohmann::json& j, const PairEvidence& e);

struct Verdict {
    CandidatePair pair;
    bool accepted = false;
    std::string reasoning;
    std::string backend;
    bool error = false; // no valid reply; rejected by default
    std::string prompt;
    std::string raw;
};

void to_json(nlohmann::json& j, const Verdict& v);

struct AgentContext {
    const Database& db;
    Gateway& gateway;
    PromptOptions prompt;
    std::size_t sample_rows = 5;
    int concurrency = 1;
};

/// One DomainKnowledge call over the given table names; none when the list
/// is empty. A failed call yields empty knowledge flagged with `error`.
DomainKnowledge derive_domain_knowledge(const AgentContext& ctx, const std::vector<std::string>& table_names);

/// Throws ResolveError when either side of the pair does not resolve.
PairEvidence build_pair_evidence(const Database& db, const CandidatePair& pair, std::size_t sample_rows = 5);

Verdict validate_candidate(const AgentContext& ctx, const PairEvidence& evidence, const DomainKnowledge& knowledge);

struct ValidationResult {
    std::vector<Verdict> verdicts; // sorted by pair
    CandidateSet accepted;
    std::size_t errors = 0;
};

/// Validates every candidate independently, up to ctx.concurrency at a time.
ValidationResult validate_all(const AgentContext& ctx, const CandidateSet& cands, const DomainKnowledge& knowledge);

} // namespace fkd
