#pragma once

#include <cstddef>
#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fkd/value.hpp"

namespace fkd {

using Row = std::vector<Value>;

struct Column {
    std::string name;
    int ordinal = 0; // 1-based
    LogicalType type = LogicalType::Text;
    std::vector<Value> values;
};

struct Table {
    std::string name;
    std::vector<Column> columns;
    std::size_t row_count = 0;

    const Column* find_column(std::string_view column) const;
    std::optional<std::size_t> column_index(std::string_view column) const;
};

struct ColumnRef {
    std::string table;
    std::string column;

    friend auto operator<=>(const ColumnRef&, const ColumnRef&) = default;

    std::string to_string() const { return table + "." + column; }
    // Splits on the first '.', so column names may contain dots but table names may not.
    static ColumnRef parse(std::string_view text);
};

// Directed column pair (referencing -> referenced). Used for INDs, candidate
// pairs, accepted pairs and ground-truth references alike.
struct ColumnPair {
    ColumnRef referencing;
    ColumnRef referenced;

    friend auto operator<=>(const ColumnPair&, const ColumnPair&) = default;

    // "t1.c1:t2.c2"
    std::string to_string() const { return referencing.to_string() + ":" + referenced.to_string(); }
    static ColumnPair parse(std::string_view text);
};

struct Database {
    std::string name;
    std::vector<Table> tables;

    const Table* find_table(std::string_view table) const;
    const Table& table(std::string_view table) const;
    const Column& column(const ColumnRef& ref) const;
    std::size_t column_count() const;
};

struct ColumnStats {
    std::string table;
    std::string column;
    int ordinal = 0;
    LogicalType type = LogicalType::Text;
    double avg_text_len = 0.0;
    std::size_t distinct_count = 0;
    std::size_t row_count = 0;
    double cardinality_ratio = 0.0;
    std::optional<Value> min_value;
    std::optional<Value> max_value;
};

void to_json(nlohmann::json& j, const ColumnStats& s);
void to_json(nlohmann::json& j, const ColumnRef& r);
void to_json(nlohmann::json& j, const ColumnPair& p);

/// Loads a SQLite file or a directory of CSV files (with optional
/// manifest.json declaring column types). Throws LoadError.
Database load_database(const std::filesystem::path& source);

/// Checks the Database invariants: non-empty name, case-insensitively unique
/// table names, unique column names, contiguous ordinals, row_count slots and
/// value/type conformance. Throws LoadError.
void validate_database(const Database& db);

ColumnStats column_stats(const Database& db, const ColumnRef& col);
ColumnStats column_stats(const Table& table, const Column& column);

/// First min(n, row_count) rows in stored order.
std::vector<Row> sample_rows(const Database& db, std::string_view table, std::size_t n);
std::vector<Row> sample_rows(const Table& table, std::size_t n);

/// Sorted distinct non-null values of a column.
std::vector<Value> distinct_values(const Column& column);
std::size_t non_null_count(const Column& column);

/// Writes one CSV per table plus manifest.json; load_database reads it back
/// to an identical Database.
void write_csv_directory(const Database& db, const std::filesystem::path& dir);

} // namespace fkd
