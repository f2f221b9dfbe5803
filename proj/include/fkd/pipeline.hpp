#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fkd/agents.hpp"
#include "fkd/eval.hpp"
#include "fkd/verifier.hpp"

namespace fkd {

struct GatewayConfig {
    std::string backend = "heuristic"; // http | scripted | heuristic
    std::string base_url = "https://api.deepseek.com/v1";
    std::string model = "deepseek-reasoner";
    std::string api_key_env = "DEEPSEEK_API_KEY";
    double temperature = 0.0;
    int concurrency = 4;
    int max_retries = 3;
    std::optional<std::filesystem::path> cache_dir;
    std::optional<std::filesystem::path> script;
};

/// Applies the keys present in a JSON config object (backend, base_url,
/// model, api_key_env, temperature, concurrency, max_retries, cache_dir,
/// script). Unknown keys are rejected.
void apply_config_json(GatewayConfig& config, const nlohmann::json& object);
/// Applies FKD_BACKEND, FKD_BASE_URL, FKD_MODEL, FKD_API_KEY_ENV,
/// FKD_TEMPERATURE, FKD_CONCURRENCY and FKD_CACHE_DIR when set.
void apply_config_env(GatewayConfig& config);

std::unique_ptr<Gateway> make_gateway(const GatewayConfig& config);

struct RunOptions {
    int max_ucc_arity = kDefaultMaxUccArity;
    std::size_t sample_rows = 5;
    bool mask = true;
    bool empty_table_mode = false;
    int concurrency = 4;
};

struct ProfileResult {
    IndSet inds;
    MinUccSet uccs;
    CandidateSet after_rules;
    SelectedKeySet keys;
    CandidateSet candidates; // after unique-key pruning
    StageCounts counts;
    std::map<CandidatePair, std::string> pruned_at; // IND pairs removed: "rules" or "unique_key"
};

/// Discovery, rule filtering, key selection and pruning.
ProfileResult run_profile(const Database& db, Gateway& gateway, const RunOptions& options);

struct DetectResult {
    ProfileResult profile;
    DomainKnowledge knowledge;
    ValidationResult validation;
    Resolution resolution;
    std::vector<std::string> flags; // soft failures
};

/// The full pipeline. Hard failures are rethrown as Error tagged with the
/// failing stage.
DetectResult run_detect(const Database& db, Gateway& gateway, const RunOptions& options);

nlohmann::json profile_to_json(const ProfileResult& profile);

/// The prediction report: foreign keys, candidates, stage counts, pruning
/// trace, verdict index, resolution trace, selected keys, knowledge, flags
/// and a config echo. Contains nothing that varies between identical runs.
nlohmann::json detect_report(const Database& db, const DetectResult& result, const Gateway& gateway,
                             const RunOptions& options);

/// Writes JSON with sorted keys and two-space indent, via a temporary file.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace fkd
