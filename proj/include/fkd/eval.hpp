#pragma once

#include <filesystem>
#include <set>

#include "fkd/profiler.hpp"

namespace fkd {

/// Elementary references (from_table, from_column, to_table, to_column).
using GroundTruth = std::set<ColumnPair>;

/// Reads a JSON array of {from_table, from_column, to_table, to_column}
/// records; duplicates collapse. With `db`, every reference must resolve.
/// Throws LoadError / ResolveError.
GroundTruth load_ground_truth(const std::filesystem::path& path, const Database* db = nullptr);
GroundTruth parse_ground_truth(const nlohmann::json& records, const Database* db = nullptr);

nlohmann::json references_to_json(const std::set<ColumnPair>& refs);

/// Ratios with a zero denominator are 0.
struct ScoreReport {
    double precision = 0;
    double recall = 0; // against the full truth
    double f1 = 0;
    double candidate_recall = 0; // against truth ∩ candidates
    double candidate_f1 = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0; // against the full truth
    std::size_t pruning_loss = 0; // truth pairs absent from the candidates
    std::size_t truth_size = 0;
    std::size_t truth_in_candidates = 0;
};

void to_json(nlohmann::json& j, const ScoreReport& r);

double f1_score(double precision, double recall);

/// Throws Error when predicted is not a subset of candidates.
ScoreReport score(const std::set<ColumnPair>& predicted, const GroundTruth& truth,
                  const std::set<ColumnPair>& candidates);

/// Fast-FK style ranking score:
///   0.2 sim(c_f, c_p) + 0.5 sim(c_f, referenced table) + 0.3 min(d_f / d_p, 1) - 0.5 [c_f unique]
/// where sim is normalized edit similarity of names and d is the distinct
/// count (alignment 0 when d_p = 0).
double fast_fk_score(const CandidatePair& pair, const Database& db);

} // namespace fkd
