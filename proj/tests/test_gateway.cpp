#include "doctest.h"

#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "httplib.h"

#include "fkd/errors.hpp"
#include "fkd/gateway.hpp"
#include "fkd/parallel.hpp"
#include "fkd/prompts.hpp"
#include "fkd/similarity.hpp"
#include "support.hpp"

using namespace fkd;
using namespace fkd::testing;
using nlohmann::json;

namespace {

// Replies from a fixed queue; the last reply repeats.
class QueueBackend : public Backend {
public:
    explicit QueueBackend(std::vector<std::string> replies, int transient_failures = 0)
        : replies_(std::move(replies)), transient_(transient_failures) {}
    std::string id() const override { return "queue"; }
    std::string complete(const CompletionRequest& request, const CompletionParams&) override {
        std::lock_guard lock(mutex_);
        prompts.push_back(request.prompt);
        if (transient_ > 0) {
            --transient_;
            throw TransientGatewayError("flaky");
        }
        const auto& r = replies_[std::min(next_, replies_.size() - 1)];
        ++next_;
        return r;
    }
    std::vector<std::string> prompts;

private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
    int transient_;
    std::mutex mutex_;
};

CompletionParams fast_params() {
    CompletionParams p;
    p.backoff = std::chrono::milliseconds(1);
    return p;
}

CompletionRequest pair_request(std::string prompt = "is it a key?") {
    return {PromptKind::PairValidation, "a.x→b.id", std::move(prompt), json::object(), std::nullopt};
}

json stats_json(const std::string& table, const std::string& column, int ordinal = 1,
                const std::string& type = "integer", double avg_len = 2.0) {
    return {{"table", table},          {"column", column},          {"ordinal", ordinal},
            {"type", type},            {"avg_text_len", avg_len},   {"distinct_count", 3},
            {"row_count", 3},          {"cardinality_ratio", 1.0},  {"min_value", 1},
            {"max_value", 3}};
}

json evidence_json(const std::string& f_table, const std::string& f_col, const std::string& p_table,
                   const std::string& p_col, json coverage = 1.0) {
    return {{"pair", f_table + "." + f_col + ":" + p_table + "." + p_col},
            {"referencing", stats_json(f_table, f_col)},
            {"referenced", stats_json(p_table, p_col)},
            {"coverage_ratio", std::move(coverage)},
            {"table_size_ratio", 1.0},
            {"out_of_range_ratio", 0.0},
            {"samples",
             {{"referencing", {{"table", f_table}, {"headers", {f_col}}, {"rows", {{1}, {2}}}}},
              {"referenced", {{"table", p_table}, {"headers", {p_col}}, {"rows", {{1}, {2}, {3}}}}}}}};
}

} // namespace

TEST_CASE("parse a plain validation reply") {
    const auto d = parse_response(PromptKind::PairValidation, R"({"is_foreign_key": true, "reasoning": "ids match"})");
    CHECK(std::get<PairValidationReply>(d).is_foreign_key);
    CHECK(std::get<PairValidationReply>(d).reasoning == "ids match");
}

TEST_CASE("json embedded in prose is extracted") {
    const std::string text = "Let me think.\nThe columns match.\n```json\n{\"chosen_index\": 1, \"reason\": \"short\"}\n```\nDone.";
    CHECK(std::get<UniqueKeyChoice>(parse_response(PromptKind::UniqueKeySelection, text, 2)).chosen_index == 1);
    const std::string bare = "Answer: {\"removed_index\": 0, \"reason\": \"a {weak} edge\"} hope this helps";
    CHECK(std::get<CycleChoice>(parse_response(PromptKind::CycleWeakest, bare, 1)).removed_index == 0);
    const std::string think = "<think>{\"retained_index\": 9}</think>{\"retained_index\": 1}";
    CHECK(std::get<MultiRefChoice>(parse_response(PromptKind::MultiRefSelect, think, 2)).retained_index == 1);
}

TEST_CASE("malformed replies are parse errors") {
    CHECK_THROWS_AS(parse_response(PromptKind::PairValidation, ""), ParseError);
    CHECK_THROWS_AS(parse_response(PromptKind::PairValidation, "yes, definitely"), ParseError);
    CHECK_THROWS_AS(parse_response(PromptKind::PairValidation, R"({"is_foreign_key": "yes"})"), ParseError);
    CHECK_THROWS_AS(parse_response(PromptKind::UniqueKeySelection, R"({"chosen_index": 2})", 2), ParseError);
    CHECK_THROWS_AS(parse_response(PromptKind::UniqueKeySelection, R"({"chosen_index": -1})", 2), ParseError);
    CHECK_THROWS_AS(parse_response(PromptKind::UniqueKeySelection, R"({"chosen_index": 0.5})", 2), ParseError);
    CHECK_THROWS_AS(parse_response(PromptKind::DomainKnowledge, R"({"entity_notes": "x"})"), ParseError);
}

TEST_CASE("prompt kind names round trip") {
    for (auto k : {PromptKind::UniqueKeySelection, PromptKind::DomainKnowledge, PromptKind::PairValidation,
                   PromptKind::MultiRefSelect, PromptKind::CycleWeakest}) {
        CHECK(parse_prompt_kind(to_string(k)) == k);
    }
    CHECK_FALSE(parse_prompt_kind("Nope"));
}

TEST_CASE("second identical call is a cache hit without a backend call") {
    TempDir dir;
    auto backend = std::make_unique<QueueBackend>(std::vector<std::string>{R"({"is_foreign_key": true})"});
    auto* raw = backend.get();
    Gateway g(std::move(backend), fast_params(), dir.path());
    const auto first = g.complete(pair_request());
    const auto second = g.complete(pair_request());
    CHECK_FALSE(first.cache_hit);
    CHECK(second.cache_hit);
    CHECK(raw->prompts.size() == 1);
    CHECK(g.stats().backend_calls == 1);
    CHECK(g.stats().cache_hits == 1);
    CHECK(std::get<PairValidationReply>(second.decision).is_foreign_key);
}

TEST_CASE("cache key depends on kind, prompt, model and temperature") {
    const auto base = ResponseCache::key(PromptKind::PairValidation, "p", "m", 0.0);
    CHECK(base == ResponseCache::key(PromptKind::PairValidation, "p", "m", 0.0));
    CHECK(base != ResponseCache::key(PromptKind::CycleWeakest, "p", "m", 0.0));
    CHECK(base != ResponseCache::key(PromptKind::PairValidation, "q", "m", 0.0));
    CHECK(base != ResponseCache::key(PromptKind::PairValidation, "p", "n", 0.0));
    CHECK(base != ResponseCache::key(PromptKind::PairValidation, "p", "m", 0.7));
}

TEST_CASE("cache soundness under concurrent calls") {
    TempDir dir;
    auto backend = std::make_unique<QueueBackend>(std::vector<std::string>{R"({"is_foreign_key": false})"});
    auto* raw = backend.get();
    Gateway g(std::move(backend), fast_params(), dir.path());
    parallel_for(64, 8, [&](std::size_t i) { g.complete(pair_request("prompt " + std::to_string(i % 8))); });
    CHECK(raw->prompts.size() == 8);
    CHECK(g.stats().cache_hits == 64 - raw->prompts.size());
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
        CHECK(e.path().extension() == ".json");
        ++files;
    }
    CHECK(files == 8);
}

TEST_CASE("one repair retry after a malformed reply") {
    auto backend = std::make_unique<QueueBackend>(
        std::vector<std::string>{"I think so", R"({"is_foreign_key": true, "reasoning": "fixed"})"});
    auto* raw = backend.get();
    Gateway g(std::move(backend), fast_params());
    const auto r = g.complete(pair_request());
    CHECK(r.repaired);
    CHECK(std::get<PairValidationReply>(r.decision).is_foreign_key);
    REQUIRE(raw->prompts.size() == 2);
    CHECK(raw->prompts[1].find(repair_suffix(PromptKind::PairValidation)) != std::string::npos);
}

TEST_CASE("second malformed reply is an error") {
    Gateway g(std::make_unique<QueueBackend>(std::vector<std::string>{""}), fast_params());
    CHECK_THROWS_AS(g.complete(pair_request()), ParseError);
    CHECK(g.stats().backend_calls == 2);
}

TEST_CASE("transient failures are retried with a bound") {
    Gateway ok(std::make_unique<QueueBackend>(std::vector<std::string>{R"({"is_foreign_key": true})"}, 2),
               fast_params());
    CHECK(std::get<PairValidationReply>(ok.complete(pair_request()).decision).is_foreign_key);
    CHECK(ok.stats().backend_calls == 3);

    Gateway down(std::make_unique<QueueBackend>(std::vector<std::string>{"{}"}, 100), fast_params());
    CHECK_THROWS_AS(down.complete(pair_request()), TransientGatewayError);
    CHECK(down.stats().backend_calls == 4);
}

TEST_CASE("scripted lookup by kind and subject") {
    ScriptedBackend backend(json{{"PairValidation|a.x→b.id", true},
                                 {"PairValidation|c.y->d.id", false},
                                 {"PairValidation|*", "not json at all"}});
    Gateway g(std::make_unique<ScriptedBackend>(backend), fast_params());
    CHECK(std::get<PairValidationReply>(g.complete(pair_request()).decision).is_foreign_key);

    auto arrow = pair_request();
    arrow.subject = "c.y→d.id";
    CHECK_FALSE(std::get<PairValidationReply>(g.complete(arrow).decision).is_foreign_key);

    auto other = pair_request();
    other.subject = "e.z→f.id";
    CHECK_THROWS_AS(g.complete(other), ParseError);

    ScriptedBackend strict(json{{"PairValidation|a.x→b.id", true}});
    CHECK_THROWS_AS(strict.complete(other, {}), GatewayError);
}

TEST_CASE("scripted named choices resolve to indices") {
    const json payload = {{"table", "t"},
                          {"row_count", 3},
                          {"no_ucc_mode", false},
                          {"candidates",
                           {{{"columns", {stats_json("t", "id")}}, {"samples", json::array()}},
                            {{"columns", {stats_json("t", "b", 3), stats_json("t", "a", 2)}},
                             {"samples", json::array()}}}}};
    ScriptedBackend backend(json{{"UniqueKeySelection|t", {{"chosen_columns", {"a", "b"}}, {"reason", "r"}}},
                                 {"MultiRefSelect|*", {{"retained", "p2.id"}}},
                                 {"CycleWeakest|*", {{"removed", "p2.id->p1.id"}}}});
    CompletionRequest key{PromptKind::UniqueKeySelection, "t", "", payload, 2};
    CHECK(std::get<UniqueKeyChoice>(parse_response(key.kind, backend.complete(key, {}), 2)).chosen_index == 1);

    const json multi = {{"referencing", "f.x"},
                        {"candidates", {evidence_json("f", "x", "p1", "id"), evidence_json("f", "x", "p2", "id")}}};
    CompletionRequest mr{PromptKind::MultiRefSelect, "f.x", "", multi, 2};
    CHECK(std::get<MultiRefChoice>(parse_response(mr.kind, backend.complete(mr, {}), 2)).retained_index == 1);

    const json cyc = {{"cycle", {"p1", "p2"}},
                      {"edges", {evidence_json("p1", "id", "p2", "id"), evidence_json("p2", "id", "p1", "id")}}};
    CompletionRequest cr{PromptKind::CycleWeakest, "p1→p2→p1", "", cyc, 2};
    CHECK(std::get<CycleChoice>(parse_response(cr.kind, backend.complete(cr, {}), 2)).removed_index == 1);
}

TEST_CASE("heuristic key selection prefers the short identifier") {
    const json code{{"columns", {stats_json("t", "code", 2, "text", 6.0)}}};
    const json name_region{{"columns", {stats_json("t", "name", 3, "text", 8.0), stats_json("t", "region", 4, "text", 5.0)}}};
    CHECK(heuristic::key_candidate_score(code, 2) == doctest::Approx(4.5));
    CHECK(heuristic::key_candidate_score(name_region, 2) == doctest::Approx(1.0));
    CHECK(heuristic::choose_unique_key(json{{"candidates", {name_region, code}}}) == 1);

    const json verbose{{"columns", {stats_json("t", "description_id", 1, "text", 42.0)}}};
    CHECK(heuristic::key_candidate_score(verbose, 1) == doctest::Approx(3.5));
}

TEST_CASE("heuristic key ties break on arity then ordinal") {
    const json a{{"columns", {stats_json("t", "x", 3)}}};
    const json b{{"columns", {stats_json("t", "y", 2)}}};
    // x and y score equally apart from the earliest bonus; y is earlier.
    CHECK(heuristic::choose_unique_key(json{{"candidates", {a, b}}}) == 1);
    const json c{{"columns", {stats_json("t", "y", 2)}}};
    CHECK(heuristic::choose_unique_key(json{{"candidates", {b, c}}}) == 0);
}

TEST_CASE("heuristic pair acceptance") {
    // Referencing name contains the referenced table name.
    CHECK(heuristic::accept_pair(evidence_json("orders", "customer_id", "customer", "id")));
    // Name similarity 0.7 (cust_id vs cust_ident) passes the 0.6 bar.
    CHECK(heuristic::pair_name_similarity(evidence_json("o", "cust_id", "c", "cust_ident")) == doctest::Approx(0.7));
    CHECK(heuristic::accept_pair(evidence_json("o", "cust_id", "c", "cust_ident")));
    CHECK_FALSE(heuristic::accept_pair(evidence_json("orders", "customer_id", "customer", "id", 0.5)));
    CHECK_FALSE(heuristic::accept_pair(evidence_json("orders", "customer_id", "customer", "id", nullptr)));
    CHECK_FALSE(heuristic::accept_pair(evidence_json("orders", "amount", "customer", "id")));
}

TEST_CASE("heuristic multi-ref and cycle choices") {
    const json multi{{"candidates", {evidence_json("f", "cust_id", "a", "region"),
                                     evidence_json("f", "cust_id", "b", "cust_ident")}}};
    CHECK(heuristic::choose_multi_ref(multi) == 1);
    const json cyc{{"edges", {evidence_json("a", "b_id", "b", "id", 1.0), evidence_json("b", "a_id", "a", "id", 0.4)}}};
    CHECK(heuristic::choose_cycle_weakest(cyc) == 1);
    const json same{{"edges", {evidence_json("a", "x", "b", "x"), evidence_json("b", "x", "a", "x")}}};
    CHECK(heuristic::choose_cycle_weakest(same) == 0);
}

TEST_CASE("masking replaces the database name in any case") {
    CHECK(mask_database_name("Northwind orders in NORTHWIND.northwind_x", "northwind") ==
          "[DATABASE] orders in [DATABASE].[DATABASE]_x");
    CHECK(mask_database_name("unchanged", "") == "unchanged");
    PromptOptions opts{"northwind", true};
    const auto text = render_prompt(PromptKind::PairValidation,
                                    json{{"evidence", evidence_json("northwind_orders", "customer_id", "customer", "id")}},
                                    opts, "Domain: northwind trading");
    CHECK(to_lower(text).find("northwind") == std::string::npos);
    CHECK(text.find(kMaskToken) != std::string::npos);
    opts.mask = false;
    CHECK(render_prompt(PromptKind::DomainKnowledge, json{{"tables", {"northwind_orders"}}}, opts).find("northwind") !=
          std::string::npos);
}

TEST_CASE("prompts are deterministic and carry the evidence labels") {
    const PromptOptions opts{"db", true};
    const json payload{{"evidence", evidence_json("orders", "customer_id", "customer", "id")}};
    const auto a = render_prompt(PromptKind::PairValidation, payload, opts, "Domain: retail");
    CHECK(a == render_prompt(PromptKind::PairValidation, payload, opts, "Domain: retail"));
    for (const char* label :
         {"Table name:", "Column name:", "Ordinal position:", "Data type:", "Average value text length:",
          "Number of distinct values:", "Number of rows in table:", "Cardinality ratio:", "Minimum value:",
          "Maximum value:", "Coverage ratio:", "Table size ratio:", "Out-of-range ratio:",
          "Example data from table orders (first 2 rows)", "Example data from table customer (first 3 rows)",
          "syntactic perspective based on naming conventions", "Statistical perspective", "Semantic perspective",
          "Domain: retail", "is_foreign_key"}) {
        CHECK_MESSAGE(contains_ci(a, label), label);
    }
}

TEST_CASE("undefined statistics render as undefined") {
    auto ev = evidence_json("e", "x", "p", "id", nullptr);
    ev["table_size_ratio"] = nullptr;
    const auto text = render_prompt(PromptKind::PairValidation, json{{"evidence", ev}}, {"db", true});
    CHECK(text.find("Coverage ratio: undefined") != std::string::npos);
    CHECK(text.find("Table size ratio: undefined") != std::string::npos);
}

TEST_CASE("key selection prompt lists every criterion") {
    const json payload = {{"table", "t"},
                          {"row_count", 3},
                          {"no_ucc_mode", false},
                          {"candidates", {{{"columns", {stats_json("t", "id")}}, {"samples", {{1}, {2}}}}}}};
    const auto text = render_prompt(PromptKind::UniqueKeySelection, payload, {"db", true});
    for (const char* phrase :
         {"uniquely identify a specific tuple", "positioned earlier in the table definition",
          "column names containing typical identifiers", "typically an integer or a string",
          "concise and human-readable", "fewer constituent columns", "logically represent the entity",
          "chosen_index"}) {
        CHECK_MESSAGE(text.find(phrase) != std::string::npos, phrase);
    }
}

TEST_CASE("missing payload field is an error") {
    CHECK_THROWS_AS(render_prompt(PromptKind::PairValidation, json::object(), {"db", true}), Error);
    CHECK_THROWS_AS(render_prompt(PromptKind::CycleWeakest, json{{"cycle", {"a"}}}, {"db", true}), Error);
}

TEST_CASE("http backend posts chat completions to a stub server") {
    httplib::Server server;
    std::mutex m;
    std::vector<json> bodies;
    std::vector<std::string> auth;
    std::atomic<int> failures_left{1};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(m);
            bodies.push_back(json::parse(req.body));
            auth.push_back(req.get_header_value("Authorization"));
        }
        if (failures_left-- > 0) {
            res.status = 503;
            return;
        }
        const json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", R"({"is_foreign_key": true})"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackendOptions opts;
    opts.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
    opts.api_key = "secret";
    Gateway g(std::make_unique<HttpBackend>(opts), fast_params());
    const auto r = g.complete(pair_request("Is orders.customer_id a reference?"));
    CHECK(std::get<PairValidationReply>(r.decision).is_foreign_key);
    CHECK(r.backend == "http");
    CHECK(g.stats().backend_calls == 2);

    opts.base_url = "http://127.0.0.1:" + std::to_string(port) + "/bad";
    Gateway bad(std::make_unique<HttpBackend>(opts), fast_params());
    CHECK_THROWS_AS(bad.complete(pair_request()), GatewayError);
    CHECK(bad.stats().backend_calls == 1);

    server.stop();
    thread.join();

    REQUIRE(bodies.size() == 2);
    const auto& body = bodies[1];
    CHECK(body.at("model") == "deepseek-reasoner");
    CHECK(body.at("temperature").get<double>() == 0.0);
    CHECK(body.at("messages").at(0).at("role") == "user");
    CHECK(body.at("messages").at(0).at("content") == "Is orders.customer_id a reference?");
    CHECK(auth[1] == "Bearer secret");
}

TEST_CASE("http backend rejects a base url without scheme") {
    HttpBackendOptions opts;
    opts.base_url = "localhost:8080";
    CHECK_THROWS_AS(HttpBackend{opts}, ConfigError);
}
