#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace fkd {

std::string to_lower(std::string_view s);

std::size_t edit_distance(std::string_view a, std::string_view b);

/// 1 - levenshtein(a, b) / max(|a|, |b|), case-insensitive. Two empty
/// strings are identical (1.0).
double name_similarity(std::string_view a, std::string_view b);

bool contains_ci(std::string_view haystack, std::string_view needle);

} // namespace fkd
