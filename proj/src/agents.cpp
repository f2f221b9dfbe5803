#include "fkd/agents.hpp"

#include <algorithm>

#include "fkd/errors.hpp"
#include "fkd/parallel.hpp"

namespace fkd {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

TableSample make_sample(const Table& table, std::size_t n) {
    TableSample s{table.name, {}, sample_rows(table, n)};
    for (const auto& c : table.columns) {
        s.headers.push_back(c.name);
    }
    return s;
}

json sample_json(const TableSample& s) {
    json rows = json::array();
    for (const auto& r : s.rows) {
        rows.push_back(r);
    }
    return {{"table", s.table}, {"headers", s.headers}, {"rows", std::move(rows)}};
}

} // namespace

std::string DomainKnowledge::text() const {
    if (empty()) {
        return {};
    }
    return "Domain: " + domain + "\nEntities: " + entity_notes;
}

void to_json(json& j, const DomainKnowledge& k) {
    j = {{"domain", k.domain}, {"entity_notes", k.entity_notes}, {"backend", k.backend}, {"error", k.error}};
}

void to_json(json& j, const PairEvidence& e) {
    j = {{"pair", e.pair.to_string()},
         {"referencing", e.referencing},
         {"referenced", e.referenced},
         {"coverage_ratio", optional_json(e.coverage_ratio)},
         {"table_size_ratio", optional_json(e.table_size_ratio)},
         {"out_of_range_ratio", optional_json(e.out_of_range_ratio)},
         {"samples", {{"referencing", sample_json(e.referencing_sample)},
                      {"referenced", sample_json(e.referenced_sample)}}}};
}

void to_json(json& j, const Verdict& v) {
    j = {{"pair", v.pair.to_string()}, {"accepted", v.accepted}, {"reasoning", v.reasoning},
         {"backend", v.backend},       {"error", v.error}};
}

DomainKnowledge derive_domain_knowledge(const AgentContext& ctx, const std::vector<std::string>& table_names) {
    DomainKnowledge k;
    if (table_names.empty()) {
        return k;
    }
    const json payload = {{"tables", table_names}};
    CompletionRequest request{PromptKind::DomainKnowledge, ctx.db.name,
                              render_prompt(PromptKind::DomainKnowledge, payload, ctx.prompt), payload, std::nullopt};
    try {
        auto response = ctx.gateway.complete(request);
        const auto& reply = std::get<DomainKnowledgeReply>(response.decision);
        k.domain = reply.domain;
        k.entity_notes = reply.entity_notes;
        k.backend = response.backend;
    } catch (const Error&) {
        k.error = true;
    }
    return k;
}

PairEvidence build_pair_evidence(const Database& db, const CandidatePair& pair, std::size_t sample_rows) {
    const auto& tf = db.table(pair.referencing.table);
    const auto& tp = db.table(pair.referenced.table);
    const auto& cf = db.column(pair.referencing);
    const auto& cp = db.column(pair.referenced);

    PairEvidence e;
    e.pair = pair;
    e.referencing = column_stats(tf, cf);
    e.referenced = column_stats(tp, cp);

    const auto df = distinct_values(cf);
    const auto dp = distinct_values(cp);
    if (!df.empty()) {
        std::vector<Value> common;
        std::set_intersection(df.begin(), df.end(), dp.begin(), dp.end(), std::back_inserter(common));
        e.coverage_ratio = static_cast<double>(common.size()) / static_cast<double>(df.size());
    }
    if (tf.row_count > 0 && tp.row_count > 0) {
        e.table_size_ratio = static_cast<double>(tf.row_count) / static_cast<double>(tp.row_count);
    }
    std::size_t present = 0;
    std::size_t outside = 0;
    for (const auto& v : cf.values) {
        if (v.is_null()) {
            continue;
        }
        ++present;
        if (dp.empty() || v < dp.front() || dp.back() < v) {
            ++outside;
        }
    }
    if (present > 0) {
        e.out_of_range_ratio = static_cast<double>(outside) / static_cast<double>(present);
    }
    e.referencing_sample = make_sample(tf, sample_rows);
    e.referenced_sample = make_sample(tp, sample_rows);
    return e;
}

Verdict validate_candidate(const AgentContext& ctx, const PairEvidence& evidence, const DomainKnowledge& knowledge) {
    Verdict v;
    v.pair = evidence.pair;
    const json payload = {{"evidence", evidence}};
    const auto subject = evidence.pair.referencing.to_string() + "→" + evidence.pair.referenced.to_string();
    CompletionRequest request{PromptKind::PairValidation, subject,
                              render_prompt(PromptKind::PairValidation, payload, ctx.prompt, knowledge.text()),
                              payload, std::nullopt};
    v.prompt = request.prompt;
    try {
        auto response = ctx.gateway.complete(request);
        const auto& reply = std::get<PairValidationReply>(response.decision);
        v.accepted = reply.is_foreign_key;
        v.reasoning = reply.reasoning;
        v.backend = response.backend;
        v.raw = response.raw;
    } catch (const Error& e) {
        v.accepted = false;
        v.error = true;
        v.reasoning = std::string("rejected by default: ") + e.what();
        v.backend = ctx.gateway.backend().id();
    }
    return v;
}

ValidationResult validate_all(const AgentContext& ctx, const CandidateSet& cands, const DomainKnowledge& knowledge) {
    const std::vector<CandidatePair> pairs(cands.begin(), cands.end());
    ValidationResult result;
    result.verdicts.resize(pairs.size());
    parallel_for(pairs.size(), ctx.concurrency, [&](std::size_t i) {
        result.verdicts[i] = validate_candidate(ctx, build_pair_evidence(ctx.db, pairs[i], ctx.sample_rows), knowledge);
    });
    for (const auto& v : result.verdicts) {
        if (v.accepted) {
            result.accepted.insert(v.pair);
        }
        if (v.error) {
            ++result.errors;
        }
    }
    return result;
}

} // namespace fkd
