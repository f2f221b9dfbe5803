#include "fkd/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace fkd {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double name_similarity(std::string_view a, std::string_view b) {
    const auto la = to_lower(a);
    const auto lb = to_lower(b);
    const auto longest = std::max(la.size(), lb.size());
    if (longest == 0) {
        return 1.0;
    }
    return 1.0 - static_cast<double>(edit_distance(la, lb)) / static_cast<double>(longest);
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) {
        return false;
    }
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

} // namespace fkd
