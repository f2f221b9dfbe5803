#include "fkd/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fkd/errors.hpp"
#include "fkd/parallel.hpp"

namespace fkd {

using nlohmann::json;
namespace fs = std::filesystem;

void apply_config_json(GatewayConfig& config, const json& object) {
    if (!object.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    try {
        for (const auto& [key, value] : object.items()) {
            if (key == "backend") {
                config.backend = value.get<std::string>();
            } else if (key == "base_url") {
                config.base_url = value.get<std::string>();
            } else if (key == "model") {
                config.model = value.get<std::string>();
            } else if (key == "api_key_env") {
                config.api_key_env = value.get<std::string>();
            } else if (key == "temperature") {
                config.temperature = value.get<double>();
            } else if (key == "concurrency") {
                config.concurrency = value.get<int>();
            } else if (key == "max_retries") {
                config.max_retries = value.get<int>();
            } else if (key == "cache_dir") {
                config.cache_dir = value.get<std::string>();
            } else if (key == "script") {
                config.script = value.get<std::string>();
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

void apply_config_env(GatewayConfig& config) {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        return v && *v ? std::optional<std::string>(v) : std::nullopt;
    };
    try {
        if (auto v = env("FKD_BACKEND")) config.backend = *v;
        if (auto v = env("FKD_BASE_URL")) config.base_url = *v;
        if (auto v = env("FKD_MODEL")) config.model = *v;
        if (auto v = env("FKD_API_KEY_ENV")) config.api_key_env = *v;
        if (auto v = env("FKD_TEMPERATURE")) config.temperature = std::stod(*v);
        if (auto v = env("FKD_CONCURRENCY")) config.concurrency = std::stoi(*v);
        if (auto v = env("FKD_CACHE_DIR")) config.cache_dir = *v;
    } catch (const std::logic_error&) {
        throw ConfigError("invalid numeric value in FKD_* environment");
    }
}

std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config) {
    if (config.concurrency < 1) {
        throw ConfigError("concurrency must be at least 1");
    }
    std::unique_ptr<Backend> backend;
    if (config.backend == "heuristic") {
        backend = std::make_unique<HeuristicBackend>();
    } else if (config.backend == "scripted") {
        if (!config.script) {
            throw ConfigError("the scripted backend needs a script file (--script)");
        }
        backend = ScriptedBackend::from_file(*config.script);
    } else if (config.backend == "http") {
        HttpBackendOptions opts;
        opts.base_url = config.base_url;
        opts.concurrency = config.concurrency;
        if (const char* key = std::getenv(config.api_key_env.c_str())) {
            opts.api_key = key;
        }
        backend = std::make_unique<HttpBackend>(std::move(opts));
    } else {
        throw ConfigError("unknown backend '" + config.backend + "' (expected http, scripted or heuristic)");
    }
    CompletionParams params;
    params.model = config.model;
    params.temperature = config.temperature;
    params.max_retries = config.max_retries;
    return std::make_unique<Gateway>(std::move(backend), std::move(params), config.cache_dir);
}

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(std::string(name) + ": " + e.what());
    }
}

PromptOptions prompt_options(const Database& db, const RunOptions& options) { return {db.name, options.mask}; }

} // namespace

ProfileResult run_profile(const Database& db, Gateway& gateway, const RunOptions& options) {
    ProfileResult r;
    r.inds = stage("ind discovery", [&] { return discover_single_column_inds(db); });
    r.uccs = stage("ucc discovery",
                   [&] { return discover_all_min_uccs(db, options.max_ucc_arity, options.concurrency); });
    r.after_rules = stage("rule filter", [&] { return filter_by_rules(r.inds, db, options.empty_table_mode); });

    const auto tables = referenced_tables(r.after_rules);
    std::vector<SelectedKey> keys(tables.size());
    stage("key selection", [&] {
        parallel_for(tables.size(), options.concurrency, [&](std::size_t i) {
            keys[i] = select_unique_key(db.table(tables[i]), r.uccs, gateway, prompt_options(db, options), {},
                                        options.sample_rows);
        });
        return 0;
    });
    for (auto& k : keys) {
        r.keys.emplace(k.table, std::move(k));
    }
    r.candidates = stage("key pruning", [&] { return prune_by_unique_keys(r.after_rules, r.keys); });
    for (const auto& ind : r.inds) {
        if (!r.after_rules.contains(ind)) {
            r.pruned_at.emplace(ind, "rules");
        } else if (!r.candidates.contains(ind)) {
            r.pruned_at.emplace(ind, "unique_key");
        }
    }
    r.counts = pruning_report(db, r.inds.size(), r.after_rules.size(), r.candidates.size());
    return r;
}

DetectResult run_detect(const Database& db, Gateway& gateway, const RunOptions& options) {
    DetectResult r;
    r.profile = run_profile(db, gateway, options);
    for (const auto& [table, key] : r.profile.keys) {
        if (key.fallback) {
            r.flags.push_back("key_selection_fallback:" + table);
        }
    }
    const AgentContext ctx{db, gateway, prompt_options(db, options), options.sample_rows, options.concurrency};

    std::set<std::string> names;
    for (const auto& c : r.profile.candidates) {
        names.insert(c.referencing.table);
        names.insert(c.referenced.table);
    }
    r.knowledge = stage("domain knowledge", [&] { return derive_domain_knowledge(ctx, {names.begin(), names.end()}); });
    if (r.knowledge.error) {
        r.flags.push_back("domain_knowledge_failed");
    }
    r.validation = stage("validation", [&] { return validate_all(ctx, r.profile.candidates, r.knowledge); });
    for (const auto& v : r.validation.verdicts) {
        if (v.error) {
            r.flags.push_back("validation_default_reject:" + v.pair.to_string());
        }
    }
    r.resolution = stage("conflict resolution", [&] { return resolve_all(ctx, r.validation.accepted, r.knowledge); });
    for (const auto& step : r.resolution.trace) {
        if (step.fallback) {
            r.flags.push_back(std::string("resolution_fallback:") + std::string(to_string(step.kind)) + ":" +
                              step.decided.to_string());
        }
    }
    return r;
}

json profile_to_json(const ProfileResult& p) {
    json uccs = json::array();
    for (const auto& u : p.uccs) {
        uccs.push_back(u);
    }
    json keys = json::object();
    for (const auto& [table, key] : p.keys) {
        keys[table] = key;
    }
    return {{"inds", references_to_json(p.inds)},
            {"min_uccs", std::move(uccs)},
            {"after_rules", references_to_json(p.after_rules)},
            {"candidates", references_to_json(p.candidates)},
            {"selected_keys", std::move(keys)},
            {"stage_counts", p.counts}};
}

json detect_report(const Database& db, const DetectResult& r, const Gateway& gateway, const RunOptions& options) {
    json pruning = json::object();
    for (const auto& [pair, where] : r.profile.pruned_at) {
        pruning[pair.to_string()] = where;
    }
    json verdicts = json::object();
    for (const auto& v : r.validation.verdicts) {
        verdicts[v.pair.to_string()] = {{"evidence", build_pair_evidence(db, v.pair, options.sample_rows)},
                                        {"prompt", v.prompt},
                                        {"raw", v.raw},
                                        {"verdict", v}};
    }
    json trace = json::array();
    for (const auto& s : r.resolution.trace) {
        trace.push_back(s);
    }
    json keys = json::object();
    for (const auto& [table, key] : r.profile.keys) {
        keys[table] = key;
    }
    const auto& params = gateway.params();
    return {{"database", db.name},
            {"foreign_keys", references_to_json(r.resolution.phi)},
            {"accepted", references_to_json(r.validation.accepted)},
            {"candidates", references_to_json(r.profile.candidates)},
            {"stage_counts", r.profile.counts},
            {"pruning_trace", std::move(pruning)},
            {"verdicts", std::move(verdicts)},
            {"resolution", {{"trace", std::move(trace)}, {"iterations", r.resolution.iterations}}},
            {"selected_keys", std::move(keys)},
            {"knowledge", r.knowledge},
            {"flags", r.flags},
            {"config",
             {{"backend", gateway.backend().id()},
              {"model", gateway.backend().model_tag(params)},
              {"temperature", params.temperature},
              {"max_ucc_arity", options.max_ucc_arity},
              {"sample_rows", options.sample_rows},
              {"mask", options.mask},
              {"empty_table_mode", options.empty_table_mode}}}};
}

void write_json_file(const fs::path& path, const json& value) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + path.string());
        }
        out << value.dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    auto value = json::parse(ss.str(), nullptr, false);
    if (value.is_discarded()) {
        throw Error(path.string() + " is not valid JSON");
    }
    return value;
}

} // namespace fkd
