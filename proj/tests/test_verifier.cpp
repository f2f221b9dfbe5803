#include "doctest.h"

#include "fkd/generators.hpp"
#include "fkd/verifier.hpp"
#include "support.hpp"

using namespace fkd;
using namespace fkd::testing;
using nlohmann::json;

namespace {

Database music_db() {
    return Database{"musicbrainz",
                    {make_table("artist", {{"id", LogicalType::Integer, ints({1, 2, 3})},
                                           {"name", LogicalType::Text, texts({"Ann", "Bo", "Cy"})}}),
                     make_table("artist_meta", {{"id", LogicalType::Integer, ints({1, 2, 3})},
                                                {"rating", LogicalType::Integer, ints({5, 3, 4})}}),
                     make_table("l_artist_recording", {{"entity0", LogicalType::Integer, ints({1, 1, 3})},
                                                       {"entity1", LogicalType::Integer, ints({7, 8, 9})}})}};
}

CandidateSet music_psi() {
    return {pair("l_artist_recording.entity0:artist.id"), pair("l_artist_recording.entity0:artist_meta.id"),
            pair("artist.id:artist_meta.id"), pair("artist_meta.id:artist.id")};
}

json music_script() {
    return json{{"MultiRefSelect|l_artist_recording.entity0",
                 {{"retained", "artist.id"}, {"reason", "artist is the core entity"}}},
                {"CycleWeakest|artist→artist_meta→artist",
                 {{"removed", "artist.id→artist_meta.id"}, {"reason", "artist_meta is auxiliary metadata"}}}};
}

std::unique_ptr<Gateway> scripted(json script) {
    return std::make_unique<Gateway>(std::make_unique<ScriptedBackend>(std::move(script)), CompletionParams{});
}

std::unique_ptr<Gateway> heuristic_gateway() {
    return std::make_unique<Gateway>(std::make_unique<HeuristicBackend>(), CompletionParams{});
}

bool has_cycle(const CandidateSet& edges) { return find_shortest_cycle(build_schema_graph(edges)).has_value(); }

} // namespace

TEST_CASE("graph construction") {
    CHECK(build_schema_graph({}).nodes.empty());
    const auto g = build_schema_graph({pair("a.x:b.id"), pair("a.y:b.id"), pair("b.z:a.id")});
    CHECK(g.nodes == std::vector<std::string>{"a", "b"});
    CHECK(g.edges.size() == 3);
}

TEST_CASE("multi-reference detection") {
    const auto conflicts = detect_multi_reference_conflicts(build_schema_graph(music_psi()));
    REQUIRE(conflicts.size() == 1);
    CHECK(conflicts[0].kind == ConflictKind::MultiRef);
    CHECK(conflicts[0].members.size() == 2);
    CHECK(detect_multi_reference_conflicts(
              build_schema_graph({pair("holding_history.hh_h_t_id:trade.t_id"), pair("holding_history.hh_t_id:trade.t_id")}))
              .empty());
    CHECK(detect_multi_reference_conflicts(build_schema_graph({pair("a.x:b.id")})).empty());
}

TEST_CASE("shortest cycle search") {
    const auto c = find_shortest_cycle(build_schema_graph(music_psi()));
    REQUIRE(c);
    CHECK(c->cycle_tables == std::vector<std::string>{"artist", "artist_meta"});
    CHECK(c->members.size() == 2);

    CHECK_FALSE(find_shortest_cycle(build_schema_graph({pair("a.x:b.id"), pair("b.y:c.id"), pair("a.z:c.id")})));
    // Self loops are legal references, not cycles.
    CHECK_FALSE(find_shortest_cycle(build_schema_graph({pair("emp.manager:emp.id")})));

    const CandidateSet two_and_three{pair("a.x:b.id"), pair("b.y:c.id"), pair("c.z:a.id"), pair("d.x:e.id"),
                                     pair("e.y:d.id")};
    const auto shortest = find_shortest_cycle(build_schema_graph(two_and_three));
    REQUIRE(shortest);
    CHECK(shortest->cycle_tables == std::vector<std::string>{"d", "e"});
}

TEST_CASE("cycle ties go to the smallest start then smallest next table") {
    const CandidateSet edges{pair("b.x:c.id"), pair("c.x:b.id"), pair("a.x:d.id"), pair("d.x:a.id"),
                             pair("a.y:c.id"), pair("c.y:a.id")};
    const auto c = find_shortest_cycle(build_schema_graph(edges));
    REQUIRE(c);
    CHECK(c->cycle_tables == std::vector<std::string>{"a", "c"});
}

TEST_CASE("parallel edges on a hop are all members") {
    const auto c = find_shortest_cycle(build_schema_graph({pair("a.x:b.id"), pair("a.y:b.id"), pair("b.z:a.id")}));
    REQUIRE(c);
    CHECK(c->members.size() == 3);
}

TEST_CASE("scripted multi-reference retains the canonical target") {
    const auto db = music_db();
    auto g = scripted(music_script());
    const AgentContext ctx{db, *g, {db.name, true}};
    const auto conflict = detect_multi_reference_conflicts(build_schema_graph(music_psi())).at(0);
    const auto step = resolve_multi_reference(ctx, conflict, {});
    CHECK(step.decided == pair("l_artist_recording.entity0:artist.id"));
    CHECK(step.removed == std::vector<CandidatePair>{pair("l_artist_recording.entity0:artist_meta.id")});
    CHECK_FALSE(step.fallback);
}

TEST_CASE("single-member group is kept unchanged") {
    const auto db = music_db();
    auto g = scripted(json::object());
    const AgentContext ctx{db, *g, {db.name, true}};
    const ConflictSet single{ConflictKind::MultiRef, {FkEdge{pair("artist_meta.id:artist.id")}}, {}};
    const auto step = resolve_multi_reference(ctx, single, {});
    CHECK(step.decided == pair("artist_meta.id:artist.id"));
    CHECK(step.removed.empty());
    CHECK(g->stats().requests == 0);
}

TEST_CASE("heuristic multi-reference keeps the most similar name") {
    Database db{"d",
                {make_table("f", {{"cust_id", LogicalType::Integer, ints({1})}}),
                 make_table("a", {{"cust_ident", LogicalType::Integer, ints({1})}}),
                 make_table("b", {{"zzz", LogicalType::Integer, ints({1})}})}};
    auto g = heuristic_gateway();
    const AgentContext ctx{db, *g, {db.name, true}};
    const ConflictSet c{ConflictKind::MultiRef, {FkEdge{pair("f.cust_id:b.zzz")}, FkEdge{pair("f.cust_id:a.cust_ident")}}, {}};
    CHECK(resolve_multi_reference(ctx, c, {}).decided == pair("f.cust_id:a.cust_ident"));
}

TEST_CASE("unparseable multi-reference reply falls back and is flagged") {
    const auto db = music_db();
    auto g = scripted(json{{"MultiRefSelect|*", "the first one"}});
    const AgentContext ctx{db, *g, {db.name, true}};
    const auto conflict = detect_multi_reference_conflicts(build_schema_graph(music_psi())).at(0);
    const auto step = resolve_multi_reference(ctx, conflict, {});
    CHECK(step.fallback);
    CHECK(step.removed.size() == 1);
}

TEST_CASE("heuristic cycle break removes the lowest coverage") {
    Database db{"d",
                {make_table("a", {{"id", LogicalType::Integer, ints({1, 2, 3, 4, 5})},
                                  {"b_ref", LogicalType::Integer, ints({1, 2, 2, 1, 1})}}),
                 make_table("b", {{"id", LogicalType::Integer, ints({1, 2, 3, 9, 10})},
                                  {"a_ref", LogicalType::Integer, ints({1, 2, 6, 7, 8})}})}};
    auto g = heuristic_gateway();
    const AgentContext ctx{db, *g, {db.name, true}};
    REQUIRE(*build_pair_evidence(db, pair("b.a_ref:a.id")).coverage_ratio == doctest::Approx(0.4));
    const auto c = find_shortest_cycle(build_schema_graph({pair("a.b_ref:b.id"), pair("b.a_ref:a.id")}));
    REQUIRE(c);
    CHECK(resolve_cycle(ctx, *c, {}).decided == pair("b.a_ref:a.id"));
}

TEST_CASE("identical cycle edges remove the first") {
    Database db{"d",
                {make_table("a", {{"x", LogicalType::Integer, ints({1, 2})}}),
                 make_table("b", {{"x", LogicalType::Integer, ints({1, 2})}})}};
    auto g = heuristic_gateway();
    const AgentContext ctx{db, *g, {db.name, true}};
    const auto c = find_shortest_cycle(build_schema_graph({pair("a.x:b.x"), pair("b.x:a.x")}));
    REQUIRE(c);
    CHECK(resolve_cycle(ctx, *c, {}).decided == pair("a.x:b.x"));
}

TEST_CASE("conflict-free input is returned unchanged") {
    const auto db = music_db();
    auto g = scripted(json::object());
    const AgentContext ctx{db, *g, {db.name, true}};
    const CandidateSet psi{pair("l_artist_recording.entity0:artist.id"), pair("artist_meta.id:artist.id")};
    const auto r = resolve_all(ctx, psi, {});
    CHECK(r.phi == psi);
    CHECK(r.trace.empty());
    CHECK(r.iterations == 0);
}

TEST_CASE("artist scenario keeps the artist-rooted references") {
    const auto db = music_db();
    auto g = scripted(music_script());
    const AgentContext ctx{db, *g, {db.name, true}};
    const auto r = resolve_all(ctx, music_psi(), {});
    CHECK(r.phi == CandidateSet{pair("l_artist_recording.entity0:artist.id"), pair("artist_meta.id:artist.id")});
    REQUIRE(r.trace.size() == 2);
    CHECK(r.trace[0].kind == ConflictKind::MultiRef);
    CHECK(r.trace[1].kind == ConflictKind::Cycle);
    CHECK(r.trace[1].decided == pair("artist.id:artist_meta.id"));
}

TEST_CASE("fuzzed graphs resolve to acyclic single-target sets") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const auto fuzz = generate_fuzz_graph(seed, 6, 3, 20 + seed % 15);
        auto g = heuristic_gateway();
        const AgentContext ctx{fuzz.db, *g, {fuzz.db.name, true}};
        const auto r = resolve_all(ctx, fuzz.edges, {});
        CHECK_FALSE(has_cycle(r.phi));
        std::map<ColumnRef, int> out_degree;
        for (const auto& e : r.phi) {
            CHECK(++out_degree[e.referencing] == 1);
        }
        CHECK(std::includes(fuzz.edges.begin(), fuzz.edges.end(), r.phi.begin(), r.phi.end()));
        std::size_t removed = 0;
        for (const auto& s : r.trace) {
            removed += s.removed.size();
        }
        CHECK(fuzz.edges.size() - r.phi.size() == removed);
        CHECK(r.iterations <= fuzz.edges.size());
    }
}
