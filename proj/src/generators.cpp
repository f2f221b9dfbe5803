#include "fkd/generators.hpp"

#include <array>
#include <random>

#include "fkd/errors.hpp"

namespace fkd {

namespace {

constexpr std::array<const char*, 20> kEntities = {
    "customer", "product", "supplier", "region",  "employee", "invoice", "shipment", "warehouse", "category", "payment",
    "account",  "branch",  "vendor",   "contract", "project", "device",  "ticket",   "course",    "student",  "author"};

std::string entity_name(int i) {
    std::string n = kEntities[static_cast<std::size_t>(i) % kEntities.size()];
    if (i >= static_cast<int>(kEntities.size())) {
        n += "_" + std::to_string(i / static_cast<int>(kEntities.size()));
    }
    return n;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    std::int64_t uniform(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen_); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(gen_); }

private:
    std::mt19937_64 gen_;
};

std::string pad2(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

std::string date_in_year(Rng& rng, int year) {
    return std::to_string(year) + "-" + pad2(static_cast<int>(rng.uniform(1, 12))) + "-" +
           pad2(static_cast<int>(rng.uniform(1, 28)));
}

double round2(double v) { return static_cast<double>(static_cast<std::int64_t>(v * 100.0)) / 100.0; }

Column make_column(std::string name, int ordinal, LogicalType type, std::vector<Value> values) {
    return {std::move(name), ordinal, type, std::move(values)};
}

void add_column(Table& t, std::string name, LogicalType type, std::vector<Value> values) {
    t.columns.push_back(make_column(std::move(name), static_cast<int>(t.columns.size()) + 1, type, std::move(values)));
}

std::vector<Value> id_values(std::int64_t first, int n_rows) {
    std::vector<Value> v;
    for (int r = 0; r < n_rows; ++r) {
        v.push_back(Value::integer(first + r));
    }
    return v;
}

} // namespace

PlantedDb generate_planted_db(std::uint64_t seed, int n_tables, int n_cols, int n_rows, int n_fks, std::string name) {
    if (n_tables < 1 || n_cols < 1 || n_rows < 1 || n_fks < 0) {
        throw Error("generate_planted_db: tables, columns and rows must be positive");
    }
    // Table i can hold up to n_cols - 1 references, each to one of tables 0..i-1.
    const long capacity = static_cast<long>(n_tables - 1) * (n_cols - 1);
    if (n_fks > capacity) {
        throw Error("generate_planted_db: " + std::to_string(n_fks) + " references do not fit in " +
                    std::to_string(n_tables) + " tables of " + std::to_string(n_cols) + " columns");
    }
    Rng rng(seed);
    PlantedDb out;
    out.db.name = std::move(name);
    for (int i = 0; i < n_tables; ++i) {
        Table t{entity_name(i), {}, static_cast<std::size_t>(n_rows)};
        add_column(t, "id", LogicalType::Integer, id_values(1, n_rows));
        out.db.tables.push_back(std::move(t));
    }
    // Spread references over tables 1.. in seeded order until n_fks are placed.
    std::vector<int> slots;
    for (int i = 1; i < n_tables; ++i) {
        for (int c = 1; c < n_cols; ++c) {
            slots.push_back(i);
        }
    }
    std::shuffle(slots.begin(), slots.end(), std::mt19937_64(seed ^ 0x9e3779b97f4a7c15ULL));
    slots.resize(static_cast<std::size_t>(n_fks));
    std::sort(slots.begin(), slots.end());
    for (int i : slots) {
        auto& t = out.db.tables[static_cast<std::size_t>(i)];
        const int target = static_cast<int>(rng.uniform(0, i - 1));
        const auto& ref = out.db.tables[static_cast<std::size_t>(target)].name;
        std::string col = ref + "_id";
        for (int k = 2; t.find_column(col); ++k) {
            col = ref + "_id" + std::to_string(k);
        }
        std::vector<Value> values;
        for (int r = 0; r < n_rows; ++r) {
            values.push_back(Value::integer(rng.uniform(1, n_rows)));
        }
        add_column(t, col, LogicalType::Integer, std::move(values));
        out.truth.insert(ColumnPair{{t.name, col}, {ref, "id"}});
    }
    static constexpr std::array<const char*, 5> kDecoys = {"amount", "label", "weight", "created", "flag"};
    for (auto& t : out.db.tables) {
        for (int k = 0; static_cast<int>(t.columns.size()) < n_cols; ++k) {
            const auto kind = static_cast<std::size_t>(k) % kDecoys.size();
            std::string col = kDecoys[kind];
            if (k >= static_cast<int>(kDecoys.size())) {
                col += std::to_string(k / static_cast<int>(kDecoys.size()) + 1);
            }
            std::vector<Value> values;
            LogicalType type = LogicalType::Integer;
            for (int r = 0; r < n_rows; ++r) {
                switch (kind) {
                case 0: // overlaps ids partially
                    values.push_back(Value::integer(rng.uniform(1, 2L * n_rows + 2)));
                    break;
                case 1:
                    type = LogicalType::Text;
                    values.push_back(Value::text("item " + std::to_string(rng.uniform(1, 50))));
                    break;
                case 2:
                    type = LogicalType::Float;
                    values.push_back(Value::real(round2(rng.real(0.0, 100.0))));
                    break;
                case 3:
                    type = LogicalType::Date;
                    values.push_back(Value::text(date_in_year(rng, static_cast<int>(rng.uniform(2015, 2024)))));
                    break;
                default:
                    type = LogicalType::Boolean;
                    values.push_back(Value::boolean(rng.coin()));
                    break;
                }
            }
            add_column(t, col, type, std::move(values));
        }
    }
    return out;
}

StarDb generate_star_db(std::uint64_t seed, int n_rows, std::string name) {
    if (n_rows < 2) {
        throw Error("generate_star_db: need at least 2 rows");
    }
    constexpr int kHubs = 4;
    constexpr int kSpokes = 16;
    Rng rng(seed);
    StarDb out;
    out.db.name = std::move(name);
    const auto id_base = [](int table) { return static_cast<std::int64_t>(table + 1) * 100000; };
    // Per-table ranges for small integer attributes, above every id range.
    constexpr std::int64_t kSmallBase = 50'000'000;
    int date_year = 1901;

    std::vector<Value> all_status{Value::text("open")};
    for (int s = 0; s < kSpokes; ++s) {
        all_status.push_back(Value::text("s" + std::to_string(s)));
    }

    for (int h = 0; h < kHubs; ++h) {
        Table t{entity_name(h), {}, static_cast<std::size_t>(n_rows)};
        out.hubs.push_back(t.name);
        add_column(t, "id", LogicalType::Integer, id_values(id_base(h), n_rows));
        std::vector<Value> code, label, status, level, created, score, active;
        for (int r = 0; r < n_rows; ++r) {
            code.push_back(Value::text("H" + std::to_string(h) + "-" + std::to_string(100000 + r)));
            label.push_back(Value::text(t.name + " " + std::to_string(rng.uniform(1, n_rows / 2 + 1))));
            // Every status value appears, so each spoke's status is contained here.
            status.push_back(r < static_cast<int>(all_status.size()) ? all_status[static_cast<std::size_t>(r)]
                                                                    : all_status[rng.uniform(0, kSpokes)]);
            level.push_back(Value::integer(kSmallBase + h * 1000 + rng.uniform(1, 5)));
            created.push_back(Value::text(date_in_year(rng, date_year)));
            score.push_back(Value::real(round2(rng.real(0.0, 10.0))));
            active.push_back(Value::boolean(rng.coin()));
        }
        ++date_year;
        add_column(t, "code", LogicalType::Text, std::move(code));
        add_column(t, "label", LogicalType::Text, std::move(label));
        add_column(t, "status", LogicalType::Text, std::move(status));
        add_column(t, "level", LogicalType::Integer, std::move(level));
        add_column(t, "created", LogicalType::Date, std::move(created));
        add_column(t, "score", LogicalType::Float, std::move(score));
        add_column(t, "active", LogicalType::Boolean, std::move(active));
        out.db.tables.push_back(std::move(t));
    }
    for (int s = 0; s < kSpokes; ++s) {
        const int table = kHubs + s;
        Table t{entity_name(table), {}, static_cast<std::size_t>(n_rows)};
        add_column(t, "id", LogicalType::Integer, id_values(id_base(table), n_rows));
        const int hub_a = s % kHubs;
        const int hub_b = (hub_a + 1 + (s / kHubs) % (kHubs - 1)) % kHubs;
        for (int hub : {hub_a, hub_b}) {
            // A private slice of the hub's ids, so no two reference columns contain each other.
            const std::int64_t width = std::max(1, n_rows / (2 * kSpokes));
            const std::int64_t lo = id_base(hub) + ((s * 2 + (hub == hub_a ? 0 : 1)) * width) % n_rows;
            const std::int64_t hi = std::min(lo + width - 1, id_base(hub) + n_rows - 1);
            std::vector<Value> values;
            for (int r = 0; r < n_rows; ++r) {
                values.push_back(Value::integer(rng.uniform(lo, hi)));
            }
            const auto col = out.hubs[static_cast<std::size_t>(hub)] + "_id";
            add_column(t, col, LogicalType::Integer, std::move(values));
            out.truth.insert(ColumnPair{{t.name, col}, {out.hubs[static_cast<std::size_t>(hub)], "id"}});
        }
        std::vector<Value> status, qty, note, created, price;
        for (int r = 0; r < n_rows; ++r) {
            status.push_back(rng.coin() ? all_status[0] : all_status[static_cast<std::size_t>(s) + 1]);
            qty.push_back(Value::integer(kSmallBase + table * 1000 + rng.uniform(1, 20)));
            note.push_back(Value::text(t.name + " note " + std::to_string(rng.uniform(1, 1000))));
            created.push_back(Value::text(date_in_year(rng, date_year)));
            price.push_back(Value::real(round2(rng.real(1.0, 500.0))));
        }
        ++date_year;
        add_column(t, "status", LogicalType::Text, std::move(status));
        add_column(t, "qty", LogicalType::Integer, std::move(qty));
        add_column(t, "note", LogicalType::Text, std::move(note));
        add_column(t, "created", LogicalType::Date, std::move(created));
        add_column(t, "price", LogicalType::Float, std::move(price));
        out.db.tables.push_back(std::move(t));
    }
    return out;
}

Table generate_random_table(std::uint64_t seed, int n_cols, int n_rows, std::string name) {
    Rng rng(seed);
    Table t{std::move(name), {}, static_cast<std::size_t>(n_rows)};
    for (int c = 0; c < n_cols; ++c) {
        const auto kind = rng.uniform(0, 5);
        // Domain width decides how often values repeat.
        const auto width = rng.uniform(1, std::max<std::int64_t>(2, n_rows * (rng.coin(0.3) ? 2 : 1)));
        const double null_rate = rng.coin(0.2) ? 0.1 : 0.0;
        const LogicalType type = kind <= 2   ? LogicalType::Integer
                                 : kind == 3 ? LogicalType::Text
                                 : kind == 4 ? LogicalType::Boolean
                                             : LogicalType::Float;
        std::vector<Value> values;
        for (int r = 0; r < n_rows; ++r) {
            if (rng.coin(null_rate)) {
                values.push_back(Value::null());
                continue;
            }
            const auto v = rng.uniform(1, width);
            switch (kind) {
            case 0:
            case 1:
            case 2:
                values.push_back(Value::integer(v));
                break;
            case 3:
                values.push_back(Value::text("v" + std::to_string(v)));
                break;
            case 4:
                values.push_back(Value::boolean(v % 2 == 0));
                break;
            default:
                values.push_back(Value::real(static_cast<double>(v) / 4.0));
                break;
            }
        }
        add_column(t, "c" + std::to_string(c + 1), type, std::move(values));
    }
    return t;
}

Database generate_random_db(std::uint64_t seed, int max_tables, int max_cols, int max_rows) {
    Rng rng(seed);
    Database db{"random", {}};
    const auto n_tables = rng.uniform(1, max_tables);
    for (int i = 0; i < n_tables; ++i) {
        const auto cols = static_cast<int>(rng.uniform(1, max_cols));
        const auto rows = static_cast<int>(rng.uniform(0, max_rows));
        db.tables.push_back(generate_random_table(seed * 1000003ULL + static_cast<std::uint64_t>(i) + 1, cols, rows,
                                                  "t" + std::to_string(i + 1)));
    }
    return db;
}

FuzzGraph generate_fuzz_graph(std::uint64_t seed, int n_tables, int n_cols, std::size_t n_edges) {
    if (n_tables < 1 || n_cols < 2) {
        throw Error("generate_fuzz_graph: need at least one table of two columns");
    }
    const auto max_edges = static_cast<std::size_t>(n_tables * n_cols) * static_cast<std::size_t>(n_tables * n_cols - 1);
    if (n_edges > max_edges) {
        throw Error("generate_fuzz_graph: too many edges requested");
    }
    Rng rng(seed);
    FuzzGraph out;
    out.db.name = "fuzz";
    for (int i = 0; i < n_tables; ++i) {
        Table t{"n" + std::to_string(i), {}, 6};
        for (int c = 0; c < n_cols; ++c) {
            std::vector<Value> values;
            for (int r = 0; r < 6; ++r) {
                values.push_back(Value::integer(rng.uniform(1, 8)));
            }
            add_column(t, "c" + std::to_string(c + 1), LogicalType::Integer, std::move(values));
        }
        out.db.tables.push_back(std::move(t));
    }
    while (out.edges.size() < n_edges) {
        const auto ft = rng.uniform(0, n_tables - 1);
        const auto pt = rng.coin(0.1) ? ft : rng.uniform(0, n_tables - 1);
        const auto fc = rng.uniform(1, n_cols);
        const auto pc = rng.uniform(1, n_cols);
        if (ft == pt && fc == pc) {
            continue;
        }
        out.edges.insert(ColumnPair{{"n" + std::to_string(ft), "c" + std::to_string(fc)},
                                    {"n" + std::to_string(pt), "c" + std::to_string(pc)}});
    }
    return out;
}

} // namespace fkd
