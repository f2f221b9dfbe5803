#include "fkd/commands.hpp"

#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "fkd/errors.hpp"
#include "fkd/pipeline.hpp"

namespace fkd {

using nlohmann::json;
namespace fs = std::filesystem;

ScoreReport evaluate_files(const fs::path& truth_path, const fs::path& predictions) {
    const auto truth = load_ground_truth(truth_path);
    const auto pred_json = read_json_file(predictions);
    std::set<ColumnPair> predicted;
    std::set<ColumnPair> candidates;
    if (pred_json.is_object()) {
        predicted = parse_ground_truth(pred_json.at("foreign_keys"));
        if (pred_json.contains("candidates")) {
            candidates = parse_ground_truth(pred_json.at("candidates"));
        } else {
            candidates = predicted;
            candidates.insert(truth.begin(), truth.end());
        }
    } else {
        predicted = parse_ground_truth(pred_json);
        candidates = predicted;
        candidates.insert(truth.begin(), truth.end());
    }
    return score(predicted, truth, candidates);
}

std::string explain_pair(const json& report, const std::string& pair_text) {
    const auto pair = ColumnPair::parse(pair_text).to_string();
    std::ostringstream out;
    if (auto it = report.at("pruning_trace").find(pair); it != report.at("pruning_trace").end()) {
        out << pair << ": pruned at stage " << it->get<std::string>() << '\n';
        return out.str();
    }
    const auto& verdicts = report.at("verdicts");
    auto it = verdicts.find(pair);
    if (it == verdicts.end()) {
        throw Error("pair " + pair + " is not in this run's verdict index or pruning trace"
                    " (not an inclusion dependency between these columns)");
    }
    const auto& entry = *it;
    const auto& verdict = entry.at("verdict");
    bool final_fk = false;
    for (const auto& fk : report.at("foreign_keys")) {
        final_fk = final_fk || ColumnPair{{fk.at("from_table"), fk.at("from_column")},
                                          {fk.at("to_table"), fk.at("to_column")}}
                                       .to_string() == pair;
    }
    out << "pair: " << pair << '\n'
        << "verdict: " << (verdict.at("accepted").get<bool>() ? "accepted" : "rejected")
        << (verdict.at("error").get<bool>() ? " (default after failure)" : "") << '\n'
        << "backend: " << verdict.at("backend").get<std::string>() << '\n'
        << "reasoning: " << verdict.at("reasoning").get<std::string>() << '\n'
        << "in final foreign keys: " << (final_fk ? "yes" : "no") << "\n\n"
        << "--- evidence ---\n"
        << entry.at("evidence").dump(2) << "\n\n"
        << "--- prompt ---\n"
        << entry.at("prompt").get<std::string>() << "\n"
        << "--- raw response ---\n"
        << entry.at("raw").get<std::string>() << '\n';
    return out.str();
}

namespace {

struct CliState {
    std::string db;
    std::string config_file;
    GatewayConfig gateway;
    std::string backend, script, model, cache_dir, base_url;
    std::optional<double> temperature;
    std::optional<int> concurrency;
    RunOptions options;
    bool no_mask = false;
    bool stages_only = false;
    std::string out_dir;
    std::string truth;
    std::string pred;
    std::string pair;
};

void add_run_options(CLI::App& cmd, CliState& s) {
    cmd.add_option("--db", s.db, "SQLite file or CSV directory")->required();
    cmd.add_option("--config", s.config_file, "JSON gateway config file");
    cmd.add_option("--backend", s.backend, "http | scripted | heuristic");
    cmd.add_option("--script", s.script, "replay file for the scripted backend");
    cmd.add_option("--model", s.model, "model id");
    cmd.add_option("--base-url", s.base_url, "chat-completions base URL");
    cmd.add_option("--temperature", s.temperature, "sampling temperature (default 0)");
    cmd.add_option("--concurrency", s.concurrency, "parallel gateway calls")->check(CLI::PositiveNumber);
    cmd.add_option("--max-ucc-arity", s.options.max_ucc_arity, "largest unique column combination searched")
        ->check(CLI::Range(1, 16));
    cmd.add_option("--sample-rows", s.options.sample_rows, "example rows shown per table");
    cmd.add_flag("--no-mask", s.no_mask, "do not mask the database name in prompts");
    cmd.add_flag("--empty-table-mode", s.options.empty_table_mode,
                 "keep candidates from empty tables and judge them on schema alone");
    cmd.add_option("--cache-dir", s.cache_dir, "response cache directory");
    cmd.add_option("--out", s.out_dir, "output directory");
}

GatewayConfig resolve_gateway(const CliState& s) {
    GatewayConfig g;
    if (!s.config_file.empty()) {
        apply_config_json(g, read_json_file(s.config_file));
    }
    apply_config_env(g);
    if (!s.backend.empty()) g.backend = s.backend;
    if (!s.script.empty()) g.script = s.script;
    if (!s.model.empty()) g.model = s.model;
    if (!s.base_url.empty()) g.base_url = s.base_url;
    if (!s.cache_dir.empty()) g.cache_dir = s.cache_dir;
    if (s.temperature) g.temperature = *s.temperature;
    if (s.concurrency) g.concurrency = *s.concurrency;
    if (g.script && s.backend.empty() && s.config_file.empty() && !std::getenv("FKD_BACKEND")) {
        g.backend = "scripted";
    }
    return g;
}

Database load_stage(const std::string& path) {
    try {
        return load_database(path);
    } catch (const Error& e) {
        throw Error(std::string("load: ") + e.what());
    }
}

int cmd_profile(CliState& s, std::ostream& out) {
    const auto db = load_stage(s.db);
    const auto g = resolve_gateway(s);
    auto gateway = make_gateway(g);
    s.options.mask = !s.no_mask;
    s.options.concurrency = g.concurrency;
    const auto result = run_profile(db, *gateway, s.options);
    const json doc = s.stages_only ? json(result.counts) : profile_to_json(result);
    if (!s.out_dir.empty()) {
        write_json_file(fs::path(s.out_dir) / (s.stages_only ? "stages.json" : "profile.json"), doc);
    }
    out << doc.dump(2) << '\n';
    bool flagged = false;
    for (const auto& [table, key] : result.keys) {
        flagged = flagged || key.fallback;
    }
    return flagged ? 2 : 0;
}

int cmd_detect(CliState& s, std::ostream& out) {
    const auto db = load_stage(s.db);
    const auto g = resolve_gateway(s);
    auto gateway = make_gateway(g);
    s.options.mask = !s.no_mask;
    s.options.concurrency = g.concurrency;
    const auto result = run_detect(db, *gateway, s.options);
    const auto report = detect_report(db, result, *gateway, s.options);
    const fs::path dir = s.out_dir.empty() ? fs::path(".") : fs::path(s.out_dir);
    write_json_file(dir / "predictions.json", report);
    const auto stats = gateway->stats();
    out << "foreign keys: " << result.resolution.phi.size() << '\n'
        << "candidates: " << result.profile.candidates.size() << " of " << result.profile.counts.raw_pairs
        << " column pairs\n"
        << "gateway: " << stats.requests << " requests, " << stats.backend_calls << " backend calls, "
        << stats.cache_hits << " cache hits, " << stats.repairs << " repairs\n"
        << "flags: " << result.flags.size() << '\n'
        << "report: " << (dir / "predictions.json").string() << '\n';
    return result.flags.empty() ? 0 : 2;
}

int cmd_evaluate(const CliState& s, std::ostream& out) {
    const auto report = evaluate_files(s.truth, s.pred);
    const json doc = report;
    if (!s.out_dir.empty()) {
        write_json_file(fs::path(s.out_dir) / "score.json", doc);
    }
    out << doc.dump(2) << '\n';
    return 0;
}

int cmd_explain(const CliState& s, std::ostream& out) {
    fs::path path = s.pred;
    if (path.empty()) {
        path = fs::path(s.out_dir.empty() ? "." : s.out_dir) / "predictions.json";
    }
    out << explain_pair(read_json_file(path), s.pair);
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Foreign-key discovery for relational databases", "fkdetect"};
    app.require_subcommand(1);
    CliState s;

    auto* profile = app.add_subcommand("profile", "discover INDs and MinUCCs and prune the candidate pairs");
    add_run_options(*profile, s);
    profile->add_flag("--stages", s.stages_only, "print only the stage counts");

    auto* detect = app.add_subcommand("detect", "run the full pipeline and write predictions.json");
    add_run_options(*detect, s);

    auto* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
    evaluate->add_option("--truth", s.truth, "ground-truth JSON")->required();
    evaluate->add_option("--pred", s.pred, "predictions.json or a JSON array of references")->required();
    evaluate->add_option("--out", s.out_dir, "directory for score.json");

    auto* explain = app.add_subcommand("explain", "show evidence, prompt and verdict for one pair");
    explain->add_option("--pair", s.pair, "t1.c1:t2.c2")->required();
    explain->add_option("--pred", s.pred, "predictions.json of a detect run");
    explain->add_option("--out", s.out_dir, "output directory of a detect run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 prints help to out and errors to err.
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }
    try {
        if (*profile) return cmd_profile(s, out);
        if (*detect) return cmd_detect(s, out);
        if (*evaluate) return cmd_evaluate(s, out);
        return cmd_explain(s, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace fkd
