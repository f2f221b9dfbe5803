#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "fkd/eval.hpp"

namespace fkd {

/// Scores a prediction file against a ground-truth file. The prediction file
/// is either a detect report (foreign_keys and candidates are used) or a
/// bare array of references, in which case the candidates are taken to be
/// predicted ∪ truth.
ScoreReport evaluate_files(const std::filesystem::path& truth, const std::filesystem::path& predictions);

/// Audit text for one pair of a detect report. Throws Error for a pair the
/// report does not mention.
std::string explain_pair(const nlohmann::json& report, const std::string& pair);

/// Entry point of the fkdetect tool. Returns the process exit code:
/// 0 success, 1 hard failure, 2 success with soft failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace fkd
