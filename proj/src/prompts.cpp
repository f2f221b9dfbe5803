#include "fkd/prompts.hpp"

#include <sstream>

#include "fkd/errors.hpp"
#include "fkd/similarity.hpp"
#include "fkd/value.hpp"

namespace fkd {

using nlohmann::json;

namespace {

const json& require(const json& payload, const char* field, PromptKind kind) {
    if (!payload.is_object() || !payload.contains(field)) {
        throw Error("render_prompt(" + std::string(to_string(kind)) + "): missing payload field '" + field + "'");
    }
    return payload.at(field);
}

std::string cell_text(const json& v) {
    if (v.is_null()) {
        return "NULL";
    }
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_number_float()) {
        return format_double(v.get<double>());
    }
    return v.dump();
}

std::string optional_number(const json& v) { return v.is_number() ? cell_text(v) : "undefined"; }

void write_stats(std::ostringstream& out, const json& s) {
    out << "Table name: " << s.at("table").get<std::string>() << '\n'
        << "Column name: " << s.at("column").get<std::string>() << '\n'
        << "Ordinal position: " << s.at("ordinal").get<int>() << '\n'
        << "Data type: " << s.at("type").get<std::string>() << '\n'
        << "Average value text length: " << cell_text(s.at("avg_text_len")) << '\n'
        << "Number of distinct values: " << s.at("distinct_count").get<std::size_t>() << '\n'
        << "Number of rows in table: " << s.at("row_count").get<std::size_t>() << '\n'
        << "Cardinality ratio: " << cell_text(s.at("cardinality_ratio")) << '\n'
        << "Minimum value: " << (s.at("min_value").is_null() ? "undefined" : cell_text(s.at("min_value"))) << '\n'
        << "Maximum value: " << (s.at("max_value").is_null() ? "undefined" : cell_text(s.at("max_value"))) << '\n';
}

void write_sample(std::ostringstream& out, const json& sample) {
    const auto& rows = sample.at("rows");
    out << "Example data from table " << sample.at("table").get<std::string>() << " (first " << rows.size()
        << " rows):\n";
    std::string line;
    for (const auto& h : sample.at("headers")) {
        line += (line.empty() ? "" : " | ") + h.get<std::string>();
    }
    out << line << '\n';
    for (const auto& row : rows) {
        line.clear();
        bool first = true;
        for (const auto& v : row) {
            line += (first ? "" : " | ") + cell_text(v);
            first = false;
        }
        out << line << '\n';
    }
}

void write_evidence(std::ostringstream& out, const json& ev) {
    out << "Candidate reference: " << ev.at("referencing").at("table").get<std::string>() << '.'
        << ev.at("referencing").at("column").get<std::string>() << " -> "
        << ev.at("referenced").at("table").get<std::string>() << '.'
        << ev.at("referenced").at("column").get<std::string>() << "\n\n";
    out << "[Referencing column]\n";
    write_stats(out, ev.at("referencing"));
    out << "\n[Referenced column]\n";
    write_stats(out, ev.at("referenced"));
    out << "\n[Dependency statistics]\n"
        << "Coverage ratio: " << optional_number(ev.at("coverage_ratio")) << '\n'
        << "Table size ratio: " << optional_number(ev.at("table_size_ratio")) << '\n'
        << "Out-of-range ratio: " << optional_number(ev.at("out_of_range_ratio")) << '\n';
    if (!ev.at("coverage_ratio").is_number() || !ev.at("table_size_ratio").is_number()) {
        out << "Note: some statistics are undefined because a table holds no data; judge from the schema.\n";
    }
    const auto& samples = ev.at("samples");
    out << '\n';
    write_sample(out, samples.at("referencing"));
    if (samples.at("referenced").at("table") != samples.at("referencing").at("table")) {
        out << '\n';
        write_sample(out, samples.at("referenced"));
    }
}

void write_knowledge(std::ostringstream& out, std::string_view knowledge) {
    if (!knowledge.empty()) {
        out << "\nDomain knowledge about this database:\n" << knowledge << '\n';
    }
}

void write_contract(std::ostringstream& out, PromptKind kind) {
    out << "\nAnswer with a single JSON object and nothing else, of the form:\n" << response_contract(kind) << '\n';
}

std::string render_unique_key(const json& payload, std::string_view knowledge) {
    constexpr auto kind = PromptKind::UniqueKeySelection;
    const auto& table = require(payload, "table", kind);
    const auto& cands = require(payload, "candidates", kind);
    const bool no_ucc = payload.value("no_ucc_mode", false);
    std::ostringstream out;
    out << "You are a database expert. Choose the column combination of table " << table.get<std::string>()
        << " that other tables would most plausibly reference as its unique key.\n";
    if (no_ucc) {
        out << "No unique column combinations could be derived from the data, so infer the key from the schema; "
               "every column is offered as a candidate.\n";
    }
    out << "Number of rows in table: " << require(payload, "row_count", kind).get<std::size_t>() << "\n\n"
        << "Judge the candidates by these criteria:\n"
        << "1. Uniqueness validity: the key must uniquely identify a specific tuple.\n"
        << "2. Ordinality: key columns are usually positioned earlier in the table definition.\n"
        << "3. Naming: prefer column names containing typical identifiers such as id, key, code or no.\n"
        << "4. Type: a key is typically an integer or a string.\n"
        << "5. Value conciseness: key values tend to be concise and human-readable.\n"
        << "6. Minimal composition: prefer keys with fewer constituent columns.\n"
        << "7. Semantic alignment: the key should logically represent the entity the table describes.\n";
    write_knowledge(out, knowledge);
    out << "\nCandidates:\n";
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& c = cands[i];
        out << "\n[" << i << "] columns:";
        for (const auto& col : c.at("columns")) {
            out << ' ' << col.at("column").get<std::string>();
        }
        out << '\n';
        for (const auto& col : c.at("columns")) {
            out << "  - " << col.at("column").get<std::string>() << ": ordinal " << col.at("ordinal").get<int>()
                << ", type " << col.at("type").get<std::string>() << ", average text length "
                << cell_text(col.at("avg_text_len")) << ", distinct values "
                << col.at("distinct_count").get<std::size_t>() << '\n';
        }
        if (c.contains("samples") && !c.at("samples").empty()) {
            out << "  sample values:";
            for (const auto& row : c.at("samples")) {
                out << " (";
                bool first = true;
                for (const auto& v : row) {
                    out << (first ? "" : ", ") << cell_text(v);
                    first = false;
                }
                out << ')';
            }
            out << '\n';
        }
    }
    write_contract(out, kind);
    return out.str();
}

std::string render_domain(const json& payload) {
    const auto& tables = require(payload, "tables", PromptKind::DomainKnowledge);
    std::ostringstream out;
    out << "You are a database expert. From the table names below alone, describe the application domain of "
           "this database and the main entities and how they are likely related.\n\nTable names:\n";
    for (const auto& t : tables) {
        out << "- " << t.get<std::string>() << '\n';
    }
    write_contract(out, PromptKind::DomainKnowledge);
    return out.str();
}

std::string render_pair(const json& payload, std::string_view knowledge) {
    const auto& ev = require(payload, "evidence", PromptKind::PairValidation);
    std::ostringstream out;
    out << "You are a database expert. Decide whether the referencing column below is a foreign key to the "
           "referenced column.\n\n"
        << "Reason from three perspectives before deciding:\n"
        << "- Syntactic perspective based on naming conventions: do the column and table names suggest a "
           "reference?\n"
        << "- Statistical perspective: do coverage, cardinality, value ranges and table sizes fit a reference?\n"
        << "- Semantic perspective: does a relationship between these entities make sense in this domain?\n";
    write_knowledge(out, knowledge);
    out << '\n';
    write_evidence(out, ev);
    write_contract(out, PromptKind::PairValidation);
    return out.str();
}

std::string render_multi_ref(const json& payload, std::string_view knowledge) {
    constexpr auto kind = PromptKind::MultiRefSelect;
    const auto& cands = require(payload, "candidates", kind);
    std::ostringstream out;
    out << "You are a database expert. Column " << require(payload, "referencing", kind).get<std::string>()
        << " was accepted as a foreign key to several different targets, but a column references at most one. "
           "Compare the candidates together and keep the single most plausible target.\n";
    write_knowledge(out, knowledge);
    for (std::size_t i = 0; i < cands.size(); ++i) {
        out << "\n=== Option [" << i << "] ===\n";
        write_evidence(out, cands[i]);
    }
    write_contract(out, kind);
    return out.str();
}

std::string render_cycle(const json& payload, std::string_view knowledge) {
    constexpr auto kind = PromptKind::CycleWeakest;
    const auto& cycle = require(payload, "cycle", kind);
    const auto& edges = require(payload, "edges", kind);
    std::string path;
    for (const auto& t : cycle) {
        path += t.get<std::string>() + " -> ";
    }
    if (!cycle.empty()) {
        path += cycle[0].get<std::string>();
    }
    std::ostringstream out;
    out << "You are a database expert. The accepted foreign keys form a cycle among tables: " << path
        << ". Identify the least plausible reference in the cycle so it can be removed.\n";
    write_knowledge(out, knowledge);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        out << "\n=== Edge [" << i << "] ===\n";
        write_evidence(out, edges[i]);
    }
    write_contract(out, kind);
    return out.str();
}

} // namespace

std::string mask_database_name(std::string text, std::string_view name) {
    if (name.empty()) {
        return text;
    }
    const auto lower_name = to_lower(name);
    std::string lower = to_lower(text);
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    for (auto hit = lower.find(lower_name); hit != std::string::npos; hit = lower.find(lower_name, pos)) {
        out.append(text, pos, hit - pos);
        out += kMaskToken;
        pos = hit + lower_name.size();
    }
    out.append(text, pos);
    return out;
}

std::string_view response_contract(PromptKind kind) {
    switch (kind) {
    case PromptKind::UniqueKeySelection:
        return R"({"chosen_index": <candidate number>, "reason": "<short justification>"})";
    case PromptKind::DomainKnowledge:
        return R"({"domain": "<domain summary>", "entity_notes": "<main entities and their relationships>"})";
    case PromptKind::PairValidation:
        return R"({"is_foreign_key": true or false, "reasoning": "<short justification>"})";
    case PromptKind::MultiRefSelect:
        return R"({"retained_index": <option number>, "reason": "<short justification>"})";
    case PromptKind::CycleWeakest:
        return R"({"removed_index": <edge number>, "reason": "<short justification>"})";
    }
    return "{}";
}

std::string repair_suffix(PromptKind kind) {
    return "\n\nYour previous answer could not be parsed. Reply again with only one JSON object of the form "
           "below, with no surrounding text:\n" +
           std::string(response_contract(kind)) + '\n';
}

std::string render_prompt(PromptKind kind, const json& payload, const PromptOptions& options,
                          std::string_view knowledge) {
    std::string text;
    try {
        switch (kind) {
        case PromptKind::UniqueKeySelection:
            text = render_unique_key(payload, knowledge);
            break;
        case PromptKind::DomainKnowledge:
            text = render_domain(payload);
            break;
        case PromptKind::PairValidation:
            text = render_pair(payload, knowledge);
            break;
        case PromptKind::MultiRefSelect:
            text = render_multi_ref(payload, knowledge);
            break;
        case PromptKind::CycleWeakest:
            text = render_cycle(payload, knowledge);
            break;
        }
    } catch (const json::exception& e) {
        throw Error("render_prompt(" + std::string(to_string(kind)) + "): malformed payload: " + e.what());
    }
    return options.mask ? mask_database_name(std::move(text), options.database_name) : text;
}

} // namespace fkd
