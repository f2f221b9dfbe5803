#include <map>
#include <set>

#include "fkd/discovery.hpp"

namespace fkd::oracle {

IndSet inds(const Database& db) {
    struct Entry {
        ColumnRef ref;
        LogicalType type;
        std::set<Value> values;
    };
    std::vector<Entry> entries;
    for (const auto& t : db.tables) {
        for (const auto& c : t.columns) {
            Entry e{{t.name, c.name}, c.type, {}};
            for (const auto& v : c.values) {
                if (!v.is_null()) {
                    e.values.insert(v);
                }
            }
            entries.push_back(std::move(e));
        }
    }
    IndSet out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (std::size_t j = 0; j < entries.size(); ++j) {
            if (i == j || entries[i].type != entries[j].type) {
                continue;
            }
            const auto& f = entries[i].values;
            const auto& p = entries[j].values;
            if (std::includes(p.begin(), p.end(), f.begin(), f.end())) {
                out.insert({entries[i].ref, entries[j].ref});
            }
        }
    }
    return out;
}

MinUccSet uccs(const Table& table, int max_arity) {
    MinUccSet out;
    const auto k = table.columns.size();
    if (table.row_count == 0 || k == 0 || max_arity < 1) {
        return out;
    }
    std::map<std::uint64_t, bool> unique;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << k); ++mask) {
        if (__builtin_popcountll(mask) > max_arity) {
            continue;
        }
        std::set<std::vector<Value>> seen;
        bool ok = true;
        for (std::size_t r = 0; r < table.row_count && ok; ++r) {
            std::vector<Value> tuple;
            for (std::size_t c = 0; c < k; ++c) {
                if (mask >> c & 1) {
                    tuple.push_back(table.columns[c].values[r]);
                }
            }
            ok = seen.insert(std::move(tuple)).second;
        }
        unique[mask] = ok;
    }
    for (const auto& [mask, is_unique] : unique) {
        if (!is_unique) {
            continue;
        }
        bool minimal = true;
        for (std::uint64_t sub = (mask - 1) & mask; sub && minimal; sub = (sub - 1) & mask) {
            minimal = !unique.at(sub);
        }
        if (minimal) {
            MinUcc u{table.name, {}};
            for (std::size_t c = 0; c < k; ++c) {
                if (mask >> c & 1) {
                    u.columns.push_back(table.columns[c].name);
                }
            }
            out.insert(std::move(u));
        }
    }
    return out;
}

} // namespace fkd::oracle
