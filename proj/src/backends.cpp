#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "httplib.h"

#include "fkd/errors.hpp"
#include "fkd/gateway.hpp"
#include "fkd/similarity.hpp"
#include "fkd/value.hpp"

namespace fkd {

using nlohmann::json;

// ---- HTTP ------------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendOptions options)
    : options_(std::move(options)), slots_(std::clamp(options_.concurrency, 1, 1024)) {
    const auto scheme_end = options_.base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("http backend: base URL must include a scheme: '" + options_.base_url + "'");
    }
    const auto path_start = options_.base_url.find('/', scheme_end + 3);
    host_ = options_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : options_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
        path_prefix_.pop_back();
    }
}

std::string HttpBackend::complete(const CompletionRequest& request, const CompletionParams& params) {
    slots_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{slots_};

    httplib::Client client(host_);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(options_.timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }
    const json body = {{"model", params.model},
                       {"temperature", params.temperature},
                       {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})}};
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
        throw TransientGatewayError("http: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransientGatewayError("http: status " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw GatewayError("http: status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    auto reply = json::parse(res->body, nullptr, false);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw GatewayError("http: completion payload has no choices[0].message.content");
    }
}

// ---- scripted --------------------------------------------------------------

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

// "a.x->b.id", "a.x→b.id" and "a.x:b.id" all name the same pair.
std::string canonical_pair(std::string s) { return replace_all(replace_all(std::move(s), "→", ":"), "->", ":"); }

std::string column_of(const json& stats) {
    return stats.at("table").get<std::string>() + "." + stats.at("column").get<std::string>();
}

std::size_t find_named_index(const json& list, const std::function<bool(const json&)>& match, const std::string& what) {
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (match(list[i])) {
            return i;
        }
    }
    throw GatewayError("scripted: " + what + " is not among the offered options");
}

} // namespace

ScriptedBackend::ScriptedBackend(json script) : script_(std::move(script)) {
    if (!script_.is_object()) {
        throw ConfigError("scripted backend: script must be a JSON object");
    }
    digest_ = sha256_hex(script_.dump()).substr(0, 16);
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read script file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    auto script = json::parse(ss.str(), nullptr, false);
    if (script.is_discarded()) {
        throw ConfigError("script file " + path.string() + " is not valid JSON");
    }
    return std::make_unique<ScriptedBackend>(std::move(script));
}

std::string ScriptedBackend::complete(const CompletionRequest& request, const CompletionParams&) {
    const std::string base = std::string(to_string(request.kind)) + "|";
    const json* entry = nullptr;
    for (const auto& key : {base + request.subject, base + replace_all(request.subject, "→", "->"), base + "*"}) {
        if (auto it = script_.find(key); it != script_.end()) {
            entry = &*it;
            break;
        }
    }
    if (!entry) {
        throw GatewayError("scripted: no entry for '" + base + request.subject + "'");
    }
    if (entry->is_string()) {
        return entry->get<std::string>();
    }
    json decision = *entry;
    switch (request.kind) {
    case PromptKind::PairValidation:
        if (decision.is_boolean()) {
            decision = json{{"is_foreign_key", decision.get<bool>()}, {"reasoning", "scripted"}};
        }
        break;
    case PromptKind::UniqueKeySelection:
        if (decision.contains("chosen_columns")) {
            auto wanted = decision.at("chosen_columns").get<std::vector<std::string>>();
            std::sort(wanted.begin(), wanted.end());
            decision["chosen_index"] = find_named_index(
                request.payload.at("candidates"),
                [&](const json& cand) {
                    std::vector<std::string> names;
                    for (const auto& c : cand.at("columns")) {
                        names.push_back(c.at("column").get<std::string>());
                    }
                    std::sort(names.begin(), names.end());
                    return names == wanted;
                },
                "key " + decision.at("chosen_columns").dump());
            decision.erase("chosen_columns");
        }
        break;
    case PromptKind::MultiRefSelect:
        if (decision.contains("retained")) {
            const auto wanted = decision.at("retained").get<std::string>();
            decision["retained_index"] = find_named_index(
                request.payload.at("candidates"),
                [&](const json& ev) { return column_of(ev.at("referenced")) == wanted; }, "target " + wanted);
            decision.erase("retained");
        }
        break;
    case PromptKind::CycleWeakest:
        if (decision.contains("removed")) {
            const auto wanted = canonical_pair(decision.at("removed").get<std::string>());
            decision["removed_index"] = find_named_index(
                request.payload.at("edges"), [&](const json& ev) { return ev.at("pair").get<std::string>() == wanted; },
                "edge " + wanted);
            decision.erase("removed");
        }
        break;
    case PromptKind::DomainKnowledge:
        break;
    }
    return decision.dump();
}

// ---- heuristic -------------------------------------------------------------

namespace heuristic {

namespace {

int max_ordinal(const json& candidate) {
    int m = 0;
    for (const auto& c : candidate.at("columns")) {
        m = std::max(m, c.at("ordinal").get<int>());
    }
    return m;
}

std::string joined_names(const json& candidate) {
    std::string out;
    for (const auto& c : candidate.at("columns")) {
        out += c.at("column").get<std::string>();
        out += ',';
    }
    return out;
}

double coverage_of(const json& evidence) {
    const auto& c = evidence.at("coverage_ratio");
    return c.is_number() ? c.get<double>() : 0.0;
}

} // namespace

double key_candidate_score(const json& candidate, int earliest_max_ordinal) {
    const auto& cols = candidate.at("columns");
    double score = 0;
    if (cols.size() == 1) {
        score += 2;
    }
    bool named = false;
    bool typed = true;
    bool verbose = false;
    for (const auto& c : cols) {
        const auto name = c.at("column").get<std::string>();
        named = named || contains_ci(name, "id") || contains_ci(name, "key") || contains_ci(name, "code");
        const auto type = c.at("type").get<std::string>();
        typed = typed && (type == "integer" || type == "text");
        verbose = verbose || c.at("avg_text_len").get<double>() > 20.0;
    }
    if (named) {
        score += 1;
    }
    if (typed) {
        score += 1;
    }
    if (max_ordinal(candidate) == earliest_max_ordinal) {
        score += 0.5;
    }
    if (verbose) {
        score -= 1;
    }
    return score;
}

std::size_t choose_unique_key(const json& payload) {
    const auto& cands = payload.at("candidates");
    if (cands.empty()) {
        throw Error("heuristic key selection: no candidates");
    }
    int earliest = std::numeric_limits<int>::max();
    for (const auto& c : cands) {
        earliest = std::min(earliest, max_ordinal(c));
    }
    std::size_t best = 0;
    auto rank = [&](std::size_t i) {
        const auto& c = cands[i];
        return std::make_tuple(-key_candidate_score(c, earliest), c.at("columns").size(), max_ordinal(c),
                               joined_names(c), i);
    };
    for (std::size_t i = 1; i < cands.size(); ++i) {
        if (rank(i) < rank(best)) {
            best = i;
        }
    }
    return best;
}

double pair_name_similarity(const json& evidence) {
    return name_similarity(evidence.at("referencing").at("column").get<std::string>(),
                           evidence.at("referenced").at("column").get<std::string>());
}

bool accept_pair(const json& evidence) {
    const auto& cov = evidence.at("coverage_ratio");
    if (!cov.is_number() || cov.get<double>() != 1.0) {
        return false;
    }
    return pair_name_similarity(evidence) >= 0.6 ||
           contains_ci(evidence.at("referencing").at("column").get<std::string>(),
                       evidence.at("referenced").at("table").get<std::string>());
}

std::size_t choose_multi_ref(const json& payload) {
    const auto& cands = payload.at("candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
        if (pair_name_similarity(cands[i]) > pair_name_similarity(cands[best])) {
            best = i;
        }
    }
    return best;
}

std::size_t choose_cycle_weakest(const json& payload) {
    const auto& edges = payload.at("edges");
    std::size_t weakest = 0;
    auto rank = [&](std::size_t i) { return std::make_pair(coverage_of(edges[i]), pair_name_similarity(edges[i])); };
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (rank(i) < rank(weakest)) {
            weakest = i;
        }
    }
    return weakest;
}

DomainKnowledgeReply domain_knowledge(const json& payload) {
    const auto& tables = payload.at("tables");
    std::string names;
    for (const auto& t : tables) {
        names += (names.empty() ? "" : ", ") + t.get<std::string>();
    }
    return {"relational database with " + std::to_string(tables.size()) + " related tables",
            "entities: " + names};
}

std::string respond(PromptKind kind, const json& payload) {
    switch (kind) {
    case PromptKind::UniqueKeySelection: {
        const auto idx = choose_unique_key(payload);
        return json{{"chosen_index", idx}, {"reason", "highest heuristic key score"}}.dump();
    }
    case PromptKind::DomainKnowledge: {
        auto dk = domain_knowledge(payload);
        return json{{"domain", dk.domain}, {"entity_notes", dk.entity_notes}}.dump();
    }
    case PromptKind::PairValidation: {
        const auto& ev = payload.at("evidence");
        const bool accept = accept_pair(ev);
        const auto& cov = ev.at("coverage_ratio");
        return json{{"is_foreign_key", accept},
                    {"reasoning", "coverage=" + (cov.is_number() ? format_double(cov.get<double>()) : "undefined") +
                                      " name_similarity=" + format_double(pair_name_similarity(ev))}}
            .dump();
    }
    case PromptKind::MultiRefSelect:
        return json{{"retained_index", choose_multi_ref(payload)}, {"reason", "highest name similarity"}}.dump();
    case PromptKind::CycleWeakest:
        return json{{"removed_index", choose_cycle_weakest(payload)},
                    {"reason", "lowest coverage, then lowest name similarity"}}
            .dump();
    }
    throw Error("heuristic: unknown prompt kind");
}

} // namespace heuristic

std::string HeuristicBackend::complete(const CompletionRequest& request, const CompletionParams&) {
    try {
        return heuristic::respond(request.kind, request.payload);
    } catch (const json::exception& e) {
        throw GatewayError(std::string("heuristic: incomplete payload: ") + e.what());
    }
}

} // namespace fkd
