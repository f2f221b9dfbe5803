#include "doctest.h"

#include <set>

#include "fkd/agents.hpp"
#include "fkd/errors.hpp"
#include "fkd/generators.hpp"
#include "support.hpp"

using namespace fkd;
using namespace fkd::testing;
using nlohmann::json;

namespace {

std::unique_ptr<Gateway> scripted(json script, std::optional<std::filesystem::path> cache = std::nullopt) {
    return std::make_unique<Gateway>(std::make_unique<ScriptedBackend>(std::move(script)), CompletionParams{},
                                     std::move(cache));
}

// A trading schema where holding_history references trade twice.
Database trading_db() {
    return Database{"tpce",
                    {make_table("trade", {{"t_id", LogicalType::Integer, ints({1, 2, 3, 4})},
                                          {"t_s_symb", LogicalType::Text, texts({"AA", "BB", "AA", "CC"})}}),
                     make_table("holding_history", {{"hh_h_t_id", LogicalType::Integer, ints({1, 1, 2})},
                                                    {"hh_t_id", LogicalType::Integer, ints({2, 3, 4})}}),
                     make_table("holding_summary", {{"hs_s_symb", LogicalType::Text, texts({"AA", "BB"})}}),
                     make_table("daily_market", {{"dm_s_symb", LogicalType::Text, texts({"AA", "BB", "CC"})},
                                                 {"dm_date", LogicalType::Date, texts({"2020-01-01", "2020-01-01", "2020-01-02"})}})}};
}

} // namespace

TEST_CASE("domain knowledge from table names") {
    const auto db = trading_db();
    auto g = scripted(json{{"DomainKnowledge|tpce",
                            {{"domain", "Financial Trading System"},
                             {"entity_notes", "Market Data (daily_market) versus Account Holdings (holding_summary)"}}}});
    const AgentContext ctx{db, *g, {db.name, true}};
    const auto k = derive_domain_knowledge(ctx, {"trade", "holding_summary", "daily_market"});
    CHECK(k.domain == "Financial Trading System");
    CHECK(k.text().find("Financial Trading System") != std::string::npos);
    CHECK(g->stats().requests == 1);
}

TEST_CASE("no tables, no knowledge call") {
    const auto db = trading_db();
    auto g = scripted(json::object());
    const AgentContext ctx{db, *g, {db.name, true}};
    const auto k = derive_domain_knowledge(ctx, {});
    CHECK(k.empty());
    CHECK_FALSE(k.error);
    CHECK(g->stats().requests == 0);
}

TEST_CASE("failed knowledge call leaves knowledge empty") {
    const auto db = trading_db();
    auto g = scripted(json::object());
    const AgentContext ctx{db, *g, {db.name, true}};
    const auto k = derive_domain_knowledge(ctx, {"trade"});
    CHECK(k.empty());
    CHECK(k.error);
}

TEST_CASE("repeated knowledge runs share one cache entry") {
    const auto db = trading_db();
    TempDir cache;
    for (int run = 0; run < 2; ++run) {
        auto g = scripted(json{{"DomainKnowledge|*", {{"domain", "trading"}, {"entity_notes", ""}}}}, cache.path());
        const AgentContext ctx{db, *g, {db.name, true}};
        derive_domain_knowledge(ctx, {"daily_market", "trade"});
        CHECK(g->stats().backend_calls == (run == 0 ? 1u : 0u));
    }
    CHECK(std::distance(std::filesystem::directory_iterator(cache.path()), std::filesystem::directory_iterator{}) == 1);
}

TEST_CASE("evidence ratios") {
    Database db{"d",
                {make_table("f", {{"c", LogicalType::Integer, ints({1, 2})}, {"r", LogicalType::Integer, ints({0, 5})}}),
                 make_table("p", {{"c", LogicalType::Integer, ints({1, 2, 3})}, {"k", LogicalType::Integer, ints({1, 8, 4})}}),
                 make_table("g", {{"r", LogicalType::Integer, ints({0, 5, 10})}})}};
    const auto cov = build_pair_evidence(db, pair("f.c:p.c"));
    CHECK(*cov.coverage_ratio == 1.0);
    CHECK(*cov.out_of_range_ratio == 0.0);

    const auto oor = build_pair_evidence(db, pair("g.r:p.k"));
    CHECK(*oor.out_of_range_ratio == doctest::Approx(0.6666666666666666));
    CHECK(*oor.coverage_ratio == 0.0);

    CHECK_THROWS_AS(build_pair_evidence(db, pair("f.c:p.missing")), ResolveError);
}

TEST_CASE("table size ratio") {
    std::vector<Value> many;
    for (int i = 0; i < 100; ++i) {
        many.push_back(Value::integer(i % 10 + 1));
    }
    Database db{"d",
                {make_table("f", {{"p_id", LogicalType::Integer, many}}),
                 make_table("p", {{"id", LogicalType::Integer, ints({1, 2, 3, 4, 5, 6, 7, 8, 9, 10})}}),
                 make_table("empty", {{"id", LogicalType::Integer, {}}})}};
    CHECK(*build_pair_evidence(db, pair("f.p_id:p.id")).table_size_ratio == 10.0);
    const auto e = build_pair_evidence(db, pair("empty.id:p.id"));
    CHECK_FALSE(e.table_size_ratio);
    CHECK_FALSE(e.coverage_ratio);
    CHECK_FALSE(e.out_of_range_ratio);
    CHECK(e.referencing_sample.rows.empty());
    CHECK(build_pair_evidence(db, pair("f.p_id:p.id"), 5).referencing_sample.rows.size() == 5);
}

TEST_CASE("evidence matches a naive recomputation") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto db = generate_random_db(seed, 3, 4, 30);
        for (const auto& tf : db.tables) {
            for (const auto& cf : tf.columns) {
                for (const auto& tp : db.tables) {
                    for (const auto& cp : tp.columns) {
                        if (cf.type != cp.type || (&cf == &cp)) {
                            continue;
                        }
                        const auto e = build_pair_evidence(db, {{tf.name, cf.name}, {tp.name, cp.name}});
                        std::set<Value> df, dp;
                        for (const auto& v : cf.values) {
                            if (!v.is_null()) df.insert(v);
                        }
                        for (const auto& v : cp.values) {
                            if (!v.is_null()) dp.insert(v);
                        }
                        std::size_t common = 0;
                        for (const auto& v : df) {
                            common += dp.count(v);
                        }
                        if (df.empty()) {
                            CHECK_FALSE(e.coverage_ratio);
                        } else {
                            CHECK(*e.coverage_ratio == doctest::Approx(double(common) / double(df.size())));
                        }
                        std::size_t present = 0, outside = 0;
                        for (const auto& v : cf.values) {
                            if (v.is_null()) continue;
                            ++present;
                            outside += dp.empty() || v < *dp.begin() || *dp.rbegin() < v;
                        }
                        if (present == 0) {
                            CHECK_FALSE(e.out_of_range_ratio);
                        } else {
                            CHECK(*e.out_of_range_ratio == doctest::Approx(double(outside) / double(present)));
                        }
                        if (tf.row_count > 0 && tp.row_count > 0) {
                            CHECK(*e.table_size_ratio == doctest::Approx(double(tf.row_count) / double(tp.row_count)));
                        }
                        CHECK(e.referencing.distinct_count == df.size());
                        CHECK(e.referenced.distinct_count == dp.size());
                    }
                }
            }
        }
    }
}

TEST_CASE("ind-backed candidates have full coverage") {
    const auto planted = generate_planted_db(4, 4, 4, 30, 3);
    for (const auto& ind : discover_single_column_inds(planted.db)) {
        const auto e = build_pair_evidence(planted.db, ind);
        if (e.referencing.distinct_count > 0) {
            CHECK(*e.coverage_ratio == 1.0);
        }
    }
}

TEST_CASE("two references into the same target are validated independently") {
    const auto db = trading_db();
    auto g = scripted(json{{"PairValidation|holding_history.hh_h_t_id→trade.t_id", true},
                           {"PairValidation|holding_history.hh_t_id→trade.t_id", true},
                           {"PairValidation|holding_summary.hs_s_symb→daily_market.dm_s_symb",
                            {{"is_foreign_key", false}, {"reasoning", "market data versus account holdings"}}}});
    const AgentContext ctx{db, *g, {db.name, true}, 5, 2};
    const CandidateSet cands{pair("holding_history.hh_h_t_id:trade.t_id"), pair("holding_history.hh_t_id:trade.t_id"),
                             pair("holding_summary.hs_s_symb:daily_market.dm_s_symb")};
    const auto r = validate_all(ctx, cands, {});
    CHECK(r.accepted == CandidateSet{pair("holding_history.hh_h_t_id:trade.t_id"), pair("holding_history.hh_t_id:trade.t_id")});
    CHECK(r.verdicts.size() == 3);
    CHECK(r.errors == 0);
}

TEST_CASE("validation prompt carries knowledge and is masked") {
    const auto db = trading_db();
    auto g = scripted(json{{"PairValidation|*", false}});
    const AgentContext ctx{db, *g, {db.name, true}};
    DomainKnowledge k{"Financial Trading System", "tpce market data", "scripted", false};
    const auto v = validate_candidate(ctx, build_pair_evidence(db, pair("holding_history.hh_t_id:trade.t_id")), k);
    CHECK(v.prompt.find("Financial Trading System") != std::string::npos);
    CHECK(v.prompt.find("tpce") == std::string::npos);
    CHECK_FALSE(v.accepted);
}

TEST_CASE("heuristic backend accepts full coverage with similar names") {
    Database db{"d",
                {make_table("lot", {{"stock_code", LogicalType::Text, texts({"a", "b"})}}),
                 make_table("inventory", {{"stock_kode", LogicalType::Text, texts({"a", "b", "c"})}})}};
    Gateway g(std::make_unique<HeuristicBackend>(), CompletionParams{});
    const AgentContext ctx{db, g, {db.name, true}};
    const auto e = build_pair_evidence(db, pair("lot.stock_code:inventory.stock_kode"));
    CHECK(heuristic::pair_name_similarity(json(e)) == doctest::Approx(0.9));
    CHECK(validate_candidate(ctx, e, {}).accepted);
}

TEST_CASE("unparseable validation is a flagged reject") {
    const auto db = trading_db();
    auto g = scripted(json{{"PairValidation|*", "maybe?"}});
    const AgentContext ctx{db, *g, {db.name, true}};
    const auto r = validate_all(ctx, {pair("holding_history.hh_t_id:trade.t_id")}, {});
    CHECK(r.accepted.empty());
    REQUIRE(r.verdicts.size() == 1);
    CHECK(r.verdicts[0].error);
    CHECK(r.errors == 1);
}

TEST_CASE("validate_all on an empty set") {
    const auto db = trading_db();
    auto g = scripted(json::object());
    const AgentContext ctx{db, *g, {db.name, true}};
    CHECK(validate_all(ctx, {}, {}).accepted.empty());
}

TEST_CASE("ten scripted pairs, six accepts, any concurrency") {
    const auto planted = generate_planted_db(21, 6, 4, 20, 0);
    std::vector<CandidatePair> pairs;
    for (std::size_t i = 1; i < planted.db.tables.size() && pairs.size() < 10; ++i) {
        for (std::size_t j = 0; j < i && pairs.size() < 10; ++j) {
            pairs.push_back({{planted.db.tables[i].name, "id"}, {planted.db.tables[j].name, "id"}});
        }
    }
    REQUIRE(pairs.size() == 10);
    json script{{"PairValidation|*", false}};
    for (std::size_t i = 0; i < 6; ++i) {
        script["PairValidation|" + pairs[i * 10 / 6].referencing.to_string() + "→" + pairs[i * 10 / 6].referenced.to_string()] = true;
    }
    const CandidateSet cands(pairs.begin(), pairs.end());
    CandidateSet first;
    for (int workers : {1, 8}) {
        auto g = scripted(script);
        const AgentContext ctx{planted.db, *g, {planted.db.name, true}, 5, workers};
        const auto r = validate_all(ctx, cands, {});
        CHECK(r.accepted.size() == 6);
        if (workers == 1) {
            first = r.accepted;
        } else {
            CHECK(r.accepted == first);
        }
    }
}
