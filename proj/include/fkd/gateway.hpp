#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"

namespace fkd {

enum class PromptKind { UniqueKeySelection, DomainKnowledge, PairValidation, MultiRefSelect, CycleWeakest };

std::string_view to_string(PromptKind kind);
std::optional<PromptKind> parse_prompt_kind(std::string_view name);

struct CompletionParams {
    std::string model = "deepseek-reasoner";
    double temperature = 0.0;
    int max_retries = 3;
    std::chrono::milliseconds backoff{500}; // doubled after each transient failure
};

struct UniqueKeyChoice {
    std::size_t chosen_index = 0;
    std::string reason;
};
struct DomainKnowledgeReply {
    std::string domain;
    std::string entity_notes;
};
struct PairValidationReply {
    bool is_foreign_key = false;
    std::string reasoning;
};
struct MultiRefChoice {
    std::size_t retained_index = 0;
    std::string reason;
};
struct CycleChoice {
    std::size_t removed_index = 0;
    std::string reason;
};

using Decision = std::variant<UniqueKeyChoice, DomainKnowledgeReply, PairValidationReply, MultiRefChoice, CycleChoice>;

nlohmann::json decision_to_json(const Decision& decision);

std::string sha256_hex(std::string_view data);

/// What an agent asks of the gateway. `prompt` is the rendered text (what the
/// HTTP backend sends); `subject` keys scripted replay; `payload` carries the
/// structured inputs the heuristic backend decides from.
struct CompletionRequest {
    PromptKind kind = PromptKind::PairValidation;
    std::string subject;
    std::string prompt;
    nlohmann::json payload;
    std::optional<std::size_t> option_count; // bound for index-valued decisions
};

struct GatewayResponse {
    std::string raw;
    Decision decision;
    std::string backend;
    bool cache_hit = false;
    bool repaired = false;
};

/// Finds the JSON object in a model reply: the whole text, a fenced ```json
/// block, or the first balanced {...} that parses. <think> blocks are skipped.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

/// Strict schema check of a reply. Throws ParseError.
Decision parse_response(PromptKind kind, std::string_view text, std::optional<std::size_t> option_count = std::nullopt);

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    // Model identity for cache keys.
    virtual std::string model_tag(const CompletionParams& params) const { return id() + ":" + params.model; }
    // Returns the raw reply text. Throws GatewayError / TransientGatewayError.
    virtual std::string complete(const CompletionRequest& request, const CompletionParams& params) = 0;
};

struct HttpBackendOptions {
    std::string base_url; // e.g. https://api.deepseek.com/v1
    std::string api_key;
    int concurrency = 4;
    std::chrono::seconds timeout{600};
};

/// Chat-completions client: POST {base_url}/chat/completions.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendOptions options);
    std::string id() const override { return "http"; }
    std::string model_tag(const CompletionParams& params) const override { return params.model; }
    std::string complete(const CompletionRequest& request, const CompletionParams& params) override;

private:
    HttpBackendOptions options_;
    std::string host_;
    std::string path_prefix_;
    std::counting_semaphore<1024> slots_;
};

/// Replays canned decisions from a JSON map "Kind|subject" -> decision.
/// "Kind|*" is the per-kind default. A string value is returned verbatim as
/// the reply; objects may name their choice ("chosen_columns", "retained",
/// "removed") instead of giving an index.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(nlohmann::json script);
    static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

    std::string id() const override { return "scripted"; }
    std::string model_tag(const CompletionParams&) const override { return "scripted:" + digest_; }
    std::string complete(const CompletionRequest& request, const CompletionParams& params) override;

private:
    nlohmann::json script_;
    std::string digest_;
};

/// Deterministic offline stand-in; see heuristic:: for the rules.
class HeuristicBackend final : public Backend {
public:
    std::string id() const override { return "heuristic"; }
    std::string model_tag(const CompletionParams&) const override { return "heuristic"; }
    std::string complete(const CompletionRequest& request, const CompletionParams& params) override;
};

/// Content-addressed reply cache: one JSON file per key under `dir`.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    static std::string key(PromptKind kind, std::string_view prompt, std::string_view model, double temperature);

    std::optional<std::string> lookup(const std::string& key) const;
    void store(const std::string& key, const nlohmann::json& entry);
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    std::atomic<std::uint64_t> tmp_counter_{0};
};

struct GatewayStats {
    std::size_t requests = 0;
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t repairs = 0;
};

/// Uniform completion entry point: cache, bounded transient retries, strict
/// parsing with a single repair retry. Safe for concurrent use.
class Gateway {
public:
    Gateway(std::unique_ptr<Backend> backend, CompletionParams params,
            std::optional<std::filesystem::path> cache_dir = std::nullopt);

    /// Throws GatewayError when the backend fails after retries, ParseError
    /// when the reply is still malformed after the repair retry.
    GatewayResponse complete(const CompletionRequest& request);

    const Backend& backend() const { return *backend_; }
    const CompletionParams& params() const { return params_; }
    const ResponseCache* cache() const { return cache_.get(); }
    GatewayStats stats() const;

private:
    std::string call_backend(const CompletionRequest& request);
    std::shared_ptr<std::mutex> key_lock(const std::string& key);

    std::unique_ptr<Backend> backend_;
    CompletionParams params_;
    std::unique_ptr<ResponseCache> cache_;
    // One in-flight call per cache key, so concurrent duplicates wait for the hit.
    std::mutex key_locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
    std::atomic<std::size_t> requests_{0};
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
    std::atomic<std::size_t> repairs_{0};
};

// Offline decision rules. Payload layouts are the ones agents build for each
// prompt kind (see prompts.hpp). These also serve as fallbacks when a
// selection reply cannot be obtained.
namespace heuristic {

/// Key-selection score: +2 single column, +1 a column name contains
/// id/key/code, +1 all columns integer or text, +0.5 earliest (lowest max
/// ordinal among candidates), -1 any column's avg_text_len > 20.
double key_candidate_score(const nlohmann::json& candidate, int earliest_max_ordinal);
/// Best score; ties by lower arity, lower max ordinal, then joined names.
std::size_t choose_unique_key(const nlohmann::json& payload);

/// coverage == 1 and (name similarity >= 0.6 or referencing column name
/// contains the referenced table name).
bool accept_pair(const nlohmann::json& evidence);
double pair_name_similarity(const nlohmann::json& evidence);

/// Highest column-name similarity, first index on ties.
std::size_t choose_multi_ref(const nlohmann::json& payload);
/// Lowest coverage, then lowest name similarity, first index on ties.
std::size_t choose_cycle_weakest(const nlohmann::json& payload);

DomainKnowledgeReply domain_knowledge(const nlohmann::json& payload);

std::string respond(PromptKind kind, const nlohmann::json& payload);

} // namespace heuristic

} // namespace fkd
