#include "fkd/gateway.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include <openssl/evp.h>

#include "fkd/errors.hpp"
#include "fkd/prompts.hpp"
#include "fkd/value.hpp"

namespace fkd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<PromptKind, std::string_view>, 5> kKindNames{{
    {PromptKind::UniqueKeySelection, "UniqueKeySelection"},
    {PromptKind::DomainKnowledge, "DomainKnowledge"},
    {PromptKind::PairValidation, "PairValidation"},
    {PromptKind::MultiRefSelect, "MultiRefSelect"},
    {PromptKind::CycleWeakest, "CycleWeakest"},
}};

std::string_view trim_view(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::optional<json> parse_object(std::string_view text) {
    auto parsed = json::parse(text.begin(), text.end(), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        return std::nullopt;
    }
    return parsed;
}

// End index (inclusive) of the balanced object starting at `open`, or npos.
std::size_t balanced_end(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) {
                return i;
            }
        }
    }
    return std::string_view::npos;
}

std::size_t index_field(const json& obj, const char* field, std::optional<std::size_t> option_count) {
    if (!obj.contains(field)) {
        throw ParseError(std::string("missing field '") + field + "'");
    }
    const auto& v = obj.at(field);
    if (!v.is_number_integer()) {
        throw ParseError(std::string("field '") + field + "' must be an integer");
    }
    const auto idx = v.get<std::int64_t>();
    if (idx < 0 || (option_count && static_cast<std::size_t>(idx) >= *option_count)) {
        throw ParseError(std::string("field '") + field + "' out of range: " + std::to_string(idx));
    }
    return static_cast<std::size_t>(idx);
}

std::string text_field(const json& obj, const char* field, bool required) {
    if (!obj.contains(field)) {
        if (required) {
            throw ParseError(std::string("missing field '") + field + "'");
        }
        return {};
    }
    const auto& v = obj.at(field);
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (required) {
        throw ParseError(std::string("field '") + field + "' must be a string");
    }
    return v.dump();
}

} // namespace

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

std::string_view to_string(PromptKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) {
            return name;
        }
    }
    return "Unknown";
}

std::optional<PromptKind> parse_prompt_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) {
            return k;
        }
    }
    return std::nullopt;
}

json decision_to_json(const Decision& decision) {
    struct Visitor {
        json operator()(const UniqueKeyChoice& d) const {
            return {{"chosen_index", d.chosen_index}, {"reason", d.reason}};
        }
        json operator()(const DomainKnowledgeReply& d) const {
            return {{"domain", d.domain}, {"entity_notes", d.entity_notes}};
        }
        json operator()(const PairValidationReply& d) const {
            return {{"is_foreign_key", d.is_foreign_key}, {"reasoning", d.reasoning}};
        }
        json operator()(const MultiRefChoice& d) const {
            return {{"retained_index", d.retained_index}, {"reason", d.reason}};
        }
        json operator()(const CycleChoice& d) const {
            return {{"removed_index", d.removed_index}, {"reason", d.reason}};
        }
    };
    return std::visit(Visitor{}, decision);
}

std::optional<json> extract_json_object(std::string_view text) {
    if (auto think = text.rfind("</think>"); think != std::string_view::npos) {
        text.remove_prefix(think + 8);
    }
    text = trim_view(text);
    if (text.empty()) {
        return std::nullopt;
    }
    if (auto whole = parse_object(text)) {
        return whole;
    }
    for (std::size_t fence = text.find("```"); fence != std::string_view::npos;
         fence = text.find("```", fence + 3)) {
        auto body_start = text.find('\n', fence);
        if (body_start == std::string_view::npos) {
            break;
        }
        auto close = text.find("```", body_start);
        if (close == std::string_view::npos) {
            break;
        }
        if (auto obj = parse_object(trim_view(text.substr(body_start, close - body_start)))) {
            return obj;
        }
        fence = close;
    }
    for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
        auto end = balanced_end(text, open);
        if (end == std::string_view::npos) {
            continue;
        }
        if (auto obj = parse_object(text.substr(open, end - open + 1))) {
            return obj;
        }
    }
    return std::nullopt;
}

Decision parse_response(PromptKind kind, std::string_view text, std::optional<std::size_t> option_count) {
    if (trim_view(text).empty()) {
        throw ParseError("empty response");
    }
    auto obj = extract_json_object(text);
    if (!obj) {
        throw ParseError("no JSON object in response");
    }
    switch (kind) {
    case PromptKind::UniqueKeySelection:
        return UniqueKeyChoice{index_field(*obj, "chosen_index", option_count), text_field(*obj, "reason", false)};
    case PromptKind::DomainKnowledge:
        return DomainKnowledgeReply{text_field(*obj, "domain", true), text_field(*obj, "entity_notes", false)};
    case PromptKind::PairValidation: {
        if (!obj->contains("is_foreign_key") || !obj->at("is_foreign_key").is_boolean()) {
            throw ParseError("field 'is_foreign_key' must be a boolean");
        }
        return PairValidationReply{obj->at("is_foreign_key").get<bool>(), text_field(*obj, "reasoning", false)};
    }
    case PromptKind::MultiRefSelect:
        return MultiRefChoice{index_field(*obj, "retained_index", option_count), text_field(*obj, "reason", false)};
    case PromptKind::CycleWeakest:
        return CycleChoice{index_field(*obj, "removed_index", option_count), text_field(*obj, "reason", false)};
    }
    throw ParseError("unknown prompt kind");
}

// ---- cache -----------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string ResponseCache::key(PromptKind kind, std::string_view prompt, std::string_view model, double temperature) {
    std::string material;
    material += to_string(kind);
    material += '\x1f';
    material += model;
    material += '\x1f';
    material += format_double(temperature);
    material += '\x1f';
    material += prompt;
    return sha256_hex(material);
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
    const auto path = dir_ / (key + ".json");
    std::lock_guard lock(mutex_);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    auto entry = json::parse(ss.str(), nullptr, false);
    if (entry.is_discarded() || !entry.contains("response") || !entry.at("response").is_string()) {
        return std::nullopt;
    }
    return entry.at("response").get<std::string>();
}

void ResponseCache::store(const std::string& key, const json& entry) {
    const auto final_path = dir_ / (key + ".json");
    const auto tmp = dir_ / (key + ".json." + std::to_string(::getpid()) + "." + std::to_string(tmp_counter_++) + ".tmp");
    std::lock_guard lock(mutex_);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write cache entry " + tmp.string());
        }
        out << entry.dump(2) << "\n";
    }
    fs::rename(tmp, final_path);
}

// ---- gateway ---------------------------------------------------------------

Gateway::Gateway(std::unique_ptr<Backend> backend, CompletionParams params, std::optional<fs::path> cache_dir)
    : backend_(std::move(backend)), params_(std::move(params)) {
    if (!backend_) {
        throw ConfigError("gateway requires a backend");
    }
    if (cache_dir) {
        cache_ = std::make_unique<ResponseCache>(*cache_dir);
    }
}

GatewayStats Gateway::stats() const {
    return {requests_.load(), backend_calls_.load(), cache_hits_.load(), repairs_.load()};
}

std::string Gateway::call_backend(const CompletionRequest& request) {
    auto delay = params_.backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            ++backend_calls_;
            return backend_->complete(request, params_);
        } catch (const TransientGatewayError&) {
            if (attempt >= params_.max_retries) {
                throw;
            }
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
    }
}

std::shared_ptr<std::mutex> Gateway::key_lock(const std::string& key) {
    std::lock_guard lock(key_locks_mutex_);
    auto& slot = key_locks_[key];
    if (!slot) {
        slot = std::make_shared<std::mutex>();
    }
    return slot;
}

GatewayResponse Gateway::complete(const CompletionRequest& request) {
    ++requests_;
    const auto model = backend_->model_tag(params_);
    std::string key;
    std::shared_ptr<std::mutex> in_flight;
    std::unique_lock<std::mutex> in_flight_lock;
    if (cache_) {
        key = ResponseCache::key(request.kind, request.prompt, model, params_.temperature);
        in_flight = key_lock(key);
        in_flight_lock = std::unique_lock(*in_flight);
        if (auto cached = cache_->lookup(key)) {
            try {
                auto decision = parse_response(request.kind, *cached, request.option_count);
                ++cache_hits_;
                return {*cached, std::move(decision), backend_->id(), true, false};
            } catch (const ParseError&) {
                // stale or foreign entry; fall through to the backend
            }
        }
    }

    auto remember = [&](const std::string& raw) {
        if (cache_) {
            cache_->store(key, json{{"kind", std::string(to_string(request.kind))},
                                    {"model", model},
                                    {"temperature", params_.temperature},
                                    {"prompt", request.prompt},
                                    {"response", raw}});
        }
    };

    auto raw = call_backend(request);
    try {
        auto decision = parse_response(request.kind, raw, request.option_count);
        remember(raw);
        return {raw, std::move(decision), backend_->id(), false, false};
    } catch (const ParseError& first) {
        ++repairs_;
        CompletionRequest repair = request;
        repair.prompt = request.prompt + repair_suffix(request.kind);
        auto second = call_backend(repair);
        try {
            auto decision = parse_response(request.kind, second, request.option_count);
            remember(second);
            return {second, std::move(decision), backend_->id(), false, true};
        } catch (const ParseError& again) {
            throw ParseError(std::string("malformed ") + std::string(to_string(request.kind)) +
                             " response after repair retry: " + again.what() + " (first attempt: " + first.what() +
                             ")");
        }
    }
}

} // namespace fkd
