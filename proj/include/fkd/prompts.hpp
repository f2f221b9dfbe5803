#pragma once

#include <string>
#include <string_view>

#include "fkd/gateway.hpp"

namespace fkd {

struct PromptOptions {
    std::string database_name;
    bool mask = true;
};

inline constexpr std::string_view kMaskToken = "[DATABASE]";

/// Renders the prompt text for a kind from its payload. Deterministic.
/// Throws Error when a required payload field is missing.
///
/// Payload layouts:
///   UniqueKeySelection  {table, row_count, no_ucc_mode, candidates: [{columns: [stats], samples: [[v]]}]}
///   DomainKnowledge     {tables: [name]}
///   PairValidation      {evidence}
///   MultiRefSelect      {referencing: "t.c", candidates: [evidence]}
///   CycleWeakest        {cycle: [table], edges: [evidence]}
/// where evidence is the JSON form of PairEvidence.
std::string render_prompt(PromptKind kind, const nlohmann::json& payload, const PromptOptions& options,
                          std::string_view knowledge = {});

/// Case-insensitive replacement of every occurrence of `name` by kMaskToken.
std::string mask_database_name(std::string text, std::string_view name);

/// The JSON shape a reply of this kind must have, as shown to the model.
std::string_view response_contract(PromptKind kind);

/// Appended to the original prompt for the single repair retry.
std::string repair_suffix(PromptKind kind);

} // namespace fkd
