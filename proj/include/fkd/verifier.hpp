#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fkd/agents.hpp"

namespace fkd {

struct FkEdge {
    CandidatePair pair;

    const std::string& from() const { return pair.referencing.table; }
    const std::string& to() const { return pair.referenced.table; }
    friend auto operator<=>(const FkEdge&, const FkEdge&) = default;
};

/// Tables as nodes, accepted pairs as directed edges. Nodes and edges are
/// kept sorted.
struct SchemaGraph {
    std::vector<std::string> nodes;
    std::vector<FkEdge> edges;
};

SchemaGraph build_schema_graph(const CandidateSet& psi_pos);

enum class ConflictKind { MultiRef, Cycle };

std::string_view to_string(ConflictKind kind);

struct ConflictSet {
    ConflictKind kind = ConflictKind::MultiRef;
    std::vector<FkEdge> members;
    std::vector<std::string> cycle_tables; // Cycle only, starting at the smallest table
};

/// Groups of edges sharing one referencing column with two or more targets.
std::vector<ConflictSet> detect_multi_reference_conflicts(const SchemaGraph& graph);

/// A minimum-length directed cycle among distinct tables, or none. Self
/// loops are ignored. Ties go to the smallest start table, then the smallest
/// next table. Members are every edge along the cycle's hops, in hop order.
std::optional<ConflictSet> find_shortest_cycle(const SchemaGraph& graph);

struct ResolutionStep {
    ConflictKind kind = ConflictKind::MultiRef;
    std::vector<CandidatePair> members;
    std::vector<std::string> cycle_tables;
    CandidatePair decided; // retained edge (MultiRef) or removed edge (Cycle)
    std::vector<CandidatePair> removed;
    std::string reason;
    std::string backend;
    bool fallback = false;
};

void to_json(nlohmann::json& j, const ResolutionStep& s);

/// Keeps one edge of a MultiRef conflict. A single-member group is returned
/// unchanged without a call. Unparseable replies fall back to the heuristic.
ResolutionStep resolve_multi_reference(const AgentContext& ctx, const ConflictSet& conflict,
                                       const DomainKnowledge& knowledge);

/// Removes one edge of a Cycle conflict.
ResolutionStep resolve_cycle(const AgentContext& ctx, const ConflictSet& conflict, const DomainKnowledge& knowledge);

struct Resolution {
    CandidateSet phi;
    std::vector<ResolutionStep> trace;
    std::size_t iterations = 0; // cycle-breaking iterations
};

/// Resolves every multi-reference conflict, then breaks shortest cycles one
/// edge at a time until none remain.
Resolution resolve_all(const AgentContext& ctx, const CandidateSet& psi_pos, const DomainKnowledge& knowledge);

} // namespace fkd
