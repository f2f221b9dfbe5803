#include "fkd/verifier.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "fkd/errors.hpp"

namespace fkd {

using nlohmann::json;

SchemaGraph build_schema_graph(const CandidateSet& psi_pos) {
    SchemaGraph g;
    std::set<std::string> nodes;
    for (const auto& p : psi_pos) {
        nodes.insert(p.referencing.table);
        nodes.insert(p.referenced.table);
        g.edges.push_back({p});
    }
    g.nodes.assign(nodes.begin(), nodes.end());
    return g;
}

std::string_view to_string(ConflictKind kind) { return kind == ConflictKind::MultiRef ? "MultiRef" : "Cycle"; }

std::vector<ConflictSet> detect_multi_reference_conflicts(const SchemaGraph& graph) {
    std::map<ColumnRef, std::vector<FkEdge>> by_source;
    for (const auto& e : graph.edges) {
        by_source[e.pair.referencing].push_back(e);
    }
    std::vector<ConflictSet> out;
    for (auto& [source, edges] : by_source) {
        if (edges.size() >= 2) {
            out.push_back({ConflictKind::MultiRef, std::move(edges), {}});
        }
    }
    return out;
}

std::optional<ConflictSet> find_shortest_cycle(const SchemaGraph& graph) {
    std::map<std::string, std::set<std::string>> succ;
    for (const auto& e : graph.edges) {
        if (e.from() != e.to()) {
            succ[e.from()].insert(e.to());
        }
    }
    std::optional<std::vector<std::string>> best;
    for (const auto& start : graph.nodes) {
        // BFS over sorted successors finds the lexicographically smallest of
        // the shortest paths back to `start`.
        std::map<std::string, std::string> parent;
        std::deque<std::pair<std::string, std::size_t>> queue{{start, 0}};
        std::optional<std::string> closing;
        std::size_t closing_depth = 0;
        while (!queue.empty() && !closing) {
            auto [node, depth] = queue.front();
            queue.pop_front();
            if (best && depth + 1 >= best->size()) {
                break;
            }
            for (const auto& next : succ[node]) {
                if (next == start) {
                    closing = node;
                    closing_depth = depth + 1;
                    break;
                }
                if (!parent.contains(next)) {
                    parent[next] = node;
                    queue.emplace_back(next, depth + 1);
                }
            }
        }
        if (!closing) {
            continue;
        }
        std::vector<std::string> cycle;
        for (std::string n = *closing; n != start; n = parent.at(n)) {
            cycle.push_back(n);
        }
        cycle.push_back(start);
        std::reverse(cycle.begin(), cycle.end());
        if (!best || closing_depth < best->size()) {
            best = std::move(cycle);
        }
    }
    if (!best) {
        return std::nullopt;
    }
    ConflictSet c{ConflictKind::Cycle, {}, *best};
    for (std::size_t i = 0; i < best->size(); ++i) {
        const auto& from = (*best)[i];
        const auto& to = (*best)[(i + 1) % best->size()];
        for (const auto& e : graph.edges) {
            if (e.from() == from && e.to() == to) {
                c.members.push_back(e);
            }
        }
    }
    return c;
}

void to_json(json& j, const ResolutionStep& s) {
    json members = json::array();
    for (const auto& m : s.members) {
        members.push_back(m.to_string());
    }
    json removed = json::array();
    for (const auto& r : s.removed) {
        removed.push_back(r.to_string());
    }
    j = {{"kind", std::string(to_string(s.kind))},
         {"members", std::move(members)},
         {"cycle_tables", s.cycle_tables},
         {s.kind == ConflictKind::MultiRef ? "retained" : "removed_edge", s.decided.to_string()},
         {"removed", std::move(removed)},
         {"reason", s.reason},
         {"backend", s.backend},
         {"fallback", s.fallback}};
}

namespace {

json evidence_list(const AgentContext& ctx, const std::vector<FkEdge>& edges) {
    json out = json::array();
    for (const auto& e : edges) {
        out.push_back(build_pair_evidence(ctx.db, e.pair, ctx.sample_rows));
    }
    return out;
}

template <class Choice>
std::size_t ask(const AgentContext& ctx, CompletionRequest request, ResolutionStep& step,
                std::size_t (*fallback)(const json&)) {
    try {
        auto response = ctx.gateway.complete(request);
        const auto& choice = std::get<Choice>(response.decision);
        step.reason = choice.reason;
        step.backend = response.backend;
        if constexpr (std::is_same_v<Choice, MultiRefChoice>) {
            return choice.retained_index;
        } else {
            return choice.removed_index;
        }
    } catch (const Error& e) {
        step.reason = std::string("heuristic fallback: ") + e.what();
        step.backend = "heuristic";
        step.fallback = true;
        return fallback(request.payload);
    }
}

} // namespace

ResolutionStep resolve_multi_reference(const AgentContext& ctx, const ConflictSet& conflict,
                                       const DomainKnowledge& knowledge) {
    if (conflict.members.empty()) {
        throw Error("resolve_multi_reference: empty conflict");
    }
    ResolutionStep step;
    step.kind = ConflictKind::MultiRef;
    for (const auto& m : conflict.members) {
        step.members.push_back(m.pair);
    }
    if (conflict.members.size() == 1) {
        step.decided = conflict.members.front().pair;
        step.reason = "single target";
        step.backend = "none";
        return step;
    }
    const auto referencing = conflict.members.front().pair.referencing.to_string();
    const json payload = {{"referencing", referencing}, {"candidates", evidence_list(ctx, conflict.members)}};
    CompletionRequest request{PromptKind::MultiRefSelect, referencing,
                              render_prompt(PromptKind::MultiRefSelect, payload, ctx.prompt, knowledge.text()),
                              payload, conflict.members.size()};
    const auto keep = ask<MultiRefChoice>(ctx, std::move(request), step, &heuristic::choose_multi_ref);
    step.decided = conflict.members.at(keep).pair;
    for (std::size_t i = 0; i < conflict.members.size(); ++i) {
        if (i != keep) {
            step.removed.push_back(conflict.members[i].pair);
        }
    }
    return step;
}

ResolutionStep resolve_cycle(const AgentContext& ctx, const ConflictSet& conflict, const DomainKnowledge& knowledge) {
    if (conflict.members.empty()) {
        throw Error("resolve_cycle: empty cycle");
    }
    ResolutionStep step;
    step.kind = ConflictKind::Cycle;
    step.cycle_tables = conflict.cycle_tables;
    for (const auto& m : conflict.members) {
        step.members.push_back(m.pair);
    }
    std::string subject;
    for (const auto& t : conflict.cycle_tables) {
        subject += t + "→";
    }
    subject += conflict.cycle_tables.empty() ? "" : conflict.cycle_tables.front();
    const json payload = {{"cycle", conflict.cycle_tables}, {"edges", evidence_list(ctx, conflict.members)}};
    CompletionRequest request{PromptKind::CycleWeakest, subject,
                              render_prompt(PromptKind::CycleWeakest, payload, ctx.prompt, knowledge.text()), payload,
                              conflict.members.size()};
    const auto drop = ask<CycleChoice>(ctx, std::move(request), step, &heuristic::choose_cycle_weakest);
    step.decided = conflict.members.at(drop).pair;
    step.removed.push_back(step.decided);
    return step;
}

Resolution resolve_all(const AgentContext& ctx, const CandidateSet& psi_pos, const DomainKnowledge& knowledge) {
    Resolution r;
    r.phi = psi_pos;
    for (const auto& conflict : detect_multi_reference_conflicts(build_schema_graph(r.phi))) {
        auto step = resolve_multi_reference(ctx, conflict, knowledge);
        for (const auto& p : step.removed) {
            r.phi.erase(p);
        }
        r.trace.push_back(std::move(step));
    }
    while (auto cycle = find_shortest_cycle(build_schema_graph(r.phi))) {
        auto step = resolve_cycle(ctx, *cycle, knowledge);
        r.phi.erase(step.decided);
        r.trace.push_back(std::move(step));
        ++r.iterations;
    }
    return r;
}

} // namespace fkd
