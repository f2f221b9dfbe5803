#include "fkd/discovery.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>

#include <boost/dynamic_bitset.hpp>

#include "fkd/parallel.hpp"

namespace fkd {

void to_json(nlohmann::json& j, const MinUcc& u) { j = {{"table", u.table}, {"columns", u.columns}}; }

IndSet discover_single_column_inds(const Database& db) {
    struct SortedColumn {
        ColumnRef ref;
        std::vector<Value> values;
    };
    std::map<LogicalType, std::vector<SortedColumn>> groups;
    for (const auto& t : db.tables) {
        for (const auto& c : t.columns) {
            groups[c.type].push_back({{t.name, c.name}, distinct_values(c)});
        }
    }

    IndSet out;
    for (auto& [type, cols] : groups) {
        const auto n = cols.size();
        if (n < 2) {
            continue;
        }
        // refs[i] = columns that have contained every value of column i seen so far.
        std::vector<boost::dynamic_bitset<>> refs(n, boost::dynamic_bitset<>(n));
        for (std::size_t i = 0; i < n; ++i) {
            refs[i].set();
            refs[i].reset(i);
        }

        struct Cursor {
            const Value* value;
            std::size_t column;
        };
        auto later = [](const Cursor& a, const Cursor& b) {
            if (*b.value < *a.value) {
                return true;
            }
            if (*a.value < *b.value) {
                return false;
            }
            return a.column > b.column;
        };
        std::priority_queue<Cursor, std::vector<Cursor>, decltype(later)> heap(later);
        std::vector<std::size_t> pos(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!cols[i].values.empty()) {
                heap.push({&cols[i].values.front(), i});
            }
        }

        boost::dynamic_bitset<> present(n);
        std::vector<std::size_t> members;
        while (!heap.empty()) {
            const Value* current = heap.top().value;
            present.reset();
            members.clear();
            while (!heap.empty() && *heap.top().value == *current) {
                const auto col = heap.top().column;
                heap.pop();
                present.set(col);
                members.push_back(col);
                if (++pos[col] < cols[col].values.size()) {
                    heap.push({&cols[col].values[pos[col]], col});
                }
            }
            for (auto m : members) {
                refs[m] &= present;
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            for (auto j = refs[i].find_first(); j != boost::dynamic_bitset<>::npos; j = refs[i].find_next(j)) {
                out.insert({cols[i].ref, cols[j].ref});
            }
        }
    }
    return out;
}

namespace {

// Dictionary-encodes a column: null -> 0, values -> 1.. in sorted order.
std::vector<std::uint32_t> encode_column(const Column& column) {
    const auto dict = distinct_values(column);
    std::vector<std::uint32_t> codes(column.values.size(), 0);
    for (std::size_t r = 0; r < column.values.size(); ++r) {
        const auto& v = column.values[r];
        if (!v.is_null()) {
            codes[r] = static_cast<std::uint32_t>(std::lower_bound(dict.begin(), dict.end(), v) - dict.begin()) + 1;
        }
    }
    return codes;
}

bool unique_encoded(const std::vector<std::vector<std::uint32_t>>& enc, const std::vector<std::size_t>& cols,
                    std::size_t rows) {
    std::vector<std::uint32_t> order(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        order[r] = static_cast<std::uint32_t>(r);
    }
    auto less = [&](std::uint32_t a, std::uint32_t b) {
        for (auto c : cols) {
            if (enc[c][a] != enc[c][b]) {
                return enc[c][a] < enc[c][b];
            }
        }
        return false;
    };
    std::sort(order.begin(), order.end(), less);
    for (std::size_t r = 1; r < rows; ++r) {
        if (!less(order[r - 1], order[r])) {
            return false;
        }
    }
    return true;
}

MinUcc make_ucc(const Table& table, const std::vector<std::size_t>& cols) {
    MinUcc u;
    u.table = table.name;
    for (auto c : cols) {
        u.columns.push_back(table.columns[c].name);
    }
    return u;
}

} // namespace

bool is_unique_projection(const Table& table, const std::vector<std::size_t>& columns) {
    std::vector<std::vector<std::uint32_t>> enc(table.columns.size());
    for (auto c : columns) {
        enc[c] = encode_column(table.columns[c]);
    }
    return unique_encoded(enc, columns, table.row_count);
}

MinUccSet discover_min_uccs(const Table& table, int max_arity) {
    MinUccSet out;
    if (table.row_count == 0 || max_arity < 1) {
        return out;
    }
    std::vector<std::vector<std::uint32_t>> enc;
    enc.reserve(table.columns.size());
    for (const auto& c : table.columns) {
        enc.push_back(encode_column(c));
    }

    using Combo = std::vector<std::size_t>;
    std::vector<Combo> non_unique;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        Combo combo{c};
        if (unique_encoded(enc, combo, table.row_count)) {
            out.insert(make_ucc(table, combo));
        } else {
            non_unique.push_back(std::move(combo));
        }
    }

    for (int arity = 2; arity <= max_arity && non_unique.size() >= 2; ++arity) {
        const std::set<Combo> previous(non_unique.begin(), non_unique.end());
        std::vector<Combo> next_level;
        // non_unique is sorted lexicographically; combos sharing a prefix are adjacent.
        for (std::size_t i = 0; i < non_unique.size(); ++i) {
            for (std::size_t j = i + 1; j < non_unique.size(); ++j) {
                const auto& a = non_unique[i];
                const auto& b = non_unique[j];
                if (!std::equal(a.begin(), a.end() - 1, b.begin())) {
                    break;
                }
                Combo candidate = a;
                candidate.push_back(b.back());
                // Every (arity-1)-subset must be a known non-unique set; otherwise
                // a unique subset exists and the candidate cannot be minimal.
                bool all_subsets_non_unique = true;
                for (std::size_t drop = 0; drop + 2 < candidate.size() && all_subsets_non_unique; ++drop) {
                    Combo subset;
                    for (std::size_t k = 0; k < candidate.size(); ++k) {
                        if (k != drop) {
                            subset.push_back(candidate[k]);
                        }
                    }
                    all_subsets_non_unique = previous.count(subset) > 0;
                }
                if (!all_subsets_non_unique) {
                    continue;
                }
                if (unique_encoded(enc, candidate, table.row_count)) {
                    out.insert(make_ucc(table, candidate));
                } else {
                    next_level.push_back(std::move(candidate));
                }
            }
        }
        std::sort(next_level.begin(), next_level.end());
        non_unique = std::move(next_level);
    }
    return out;
}

MinUccSet discover_all_min_uccs(const Database& db, int max_arity, int workers) {
    std::vector<MinUccSet> per_table(db.tables.size());
    parallel_for(db.tables.size(), workers,
                 [&](std::size_t i) { per_table[i] = discover_min_uccs(db.tables[i], max_arity); });
    MinUccSet out;
    for (auto& s : per_table) {
        out.insert(s.begin(), s.end());
    }
    return out;
}

} // namespace fkd
