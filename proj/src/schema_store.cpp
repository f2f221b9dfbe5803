#include "fkd/schema_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <sqlite3.h>

#include "fkd/errors.hpp"

namespace fkd {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](unsigned char c) { return (c & 0xC0) != 0x80; }));
}

// A cell as read from the source, before typing.
using RawCell = std::optional<std::string>;

struct RawTable {
    std::string name;
    std::vector<std::string> column_names;
    std::vector<std::optional<LogicalType>> declared;
    std::vector<std::vector<RawCell>> columns; // column-major
};

LogicalType infer_type(const std::vector<RawCell>& cells) {
    bool any = false;
    bool all_int = true, all_num = true, all_date = true, all_datetime = true;
    for (const auto& c : cells) {
        if (!c) {
            continue;
        }
        any = true;
        all_int = all_int && convert_text(*c, LogicalType::Integer).has_value();
        all_num = all_num && convert_text(*c, LogicalType::Float).has_value();
        all_date = all_date && convert_text(*c, LogicalType::Date).has_value();
        all_datetime = all_datetime && convert_text(*c, LogicalType::DateTime).has_value();
    }
    if (!any) {
        return LogicalType::Text;
    }
    if (all_int) {
        return LogicalType::Integer;
    }
    if (all_num) {
        return LogicalType::Float;
    }
    if (all_date) {
        return LogicalType::Date;
    }
    if (all_datetime) {
        return LogicalType::DateTime;
    }
    return LogicalType::Text;
}

Table type_table(RawTable raw) {
    Table table;
    table.name = std::move(raw.name);
    table.row_count = raw.columns.empty() ? 0 : raw.columns.front().size();
    for (std::size_t i = 0; i < raw.column_names.size(); ++i) {
        auto& cells = raw.columns[i];
        if (cells.size() != table.row_count) {
            throw LoadError("table '" + table.name + "': ragged column '" + raw.column_names[i] + "'");
        }
        Column col;
        col.name = raw.column_names[i];
        col.ordinal = static_cast<int>(i) + 1;
        col.type = raw.declared[i] ? *raw.declared[i] : infer_type(cells);
        col.values.reserve(cells.size());
        for (std::size_t r = 0; r < cells.size(); ++r) {
            const auto& cell = cells[r];
            if (!cell || (cell->empty() && col.type != LogicalType::Text)) {
                col.values.push_back(Value::null());
                continue;
            }
            auto v = convert_text(*cell, col.type);
            if (!v) {
                throw LoadError("table '" + table.name + "', column '" + col.name + "', row " + std::to_string(r + 1) +
                                ": value '" + *cell + "' does not conform to type " +
                                std::string(to_string(col.type)));
            }
            col.values.push_back(std::move(*v));
        }
        table.columns.push_back(std::move(col));
    }
    return table;
}

// ---- CSV -------------------------------------------------------------------

// RFC-4180 reader. Unquoted empty fields are null; quoted empty fields are "".
std::vector<std::vector<RawCell>> parse_csv(const std::string& text, const std::string& origin) {
    std::vector<std::vector<RawCell>> rows;
    std::vector<RawCell> row;
    std::string field;
    bool quoted = false;
    bool in_quotes = false;
    bool field_started = false;
    auto end_field = [&] {
        if (!quoted && field.empty()) {
            row.emplace_back(std::nullopt);
        } else {
            row.emplace_back(field);
        }
        field.clear();
        quoted = false;
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            // handled by '\n'
        } else if (c == '\n') {
            end_row();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) {
        throw LoadError(origin + ": unterminated quoted field");
    }
    if (field_started || quoted || !row.empty()) {
        end_row();
    }
    return rows;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RawTable read_csv_table(const fs::path& file, const std::string& table_name,
                        const std::vector<std::pair<std::string, LogicalType>>* declared) {
    auto rows = parse_csv(read_file(file), file.string());
    if (rows.empty()) {
        throw LoadError(file.string() + ": missing header row");
    }
    RawTable raw;
    raw.name = table_name;
    for (auto& h : rows.front()) {
        if (!h || h->empty()) {
            throw LoadError(file.string() + ": empty column name in header");
        }
        raw.column_names.push_back(*h);
    }
    const auto width = raw.column_names.size();
    raw.columns.assign(width, {});
    raw.declared.assign(width, std::nullopt);
    if (declared) {
        if (declared->size() != width) {
            throw LoadError(file.string() + ": manifest declares " + std::to_string(declared->size()) +
                            " columns but header has " + std::to_string(width));
        }
        for (std::size_t i = 0; i < width; ++i) {
            if ((*declared)[i].first != raw.column_names[i]) {
                throw LoadError(file.string() + ": manifest column '" + (*declared)[i].first +
                                "' does not match header column '" + raw.column_names[i] + "'");
            }
            raw.declared[i] = (*declared)[i].second;
        }
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto& row = rows[r];
        if (row.size() == 1 && !row[0] && width != 1) {
            continue; // blank line
        }
        if (row.size() != width) {
            throw LoadError(file.string() + ": row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                            " fields, expected " + std::to_string(width));
        }
        for (std::size_t i = 0; i < width; ++i) {
            raw.columns[i].push_back(std::move(row[i]));
        }
    }
    return raw;
}

Database load_csv_directory(const fs::path& dir) {
    Database db;
    auto norm = dir.lexically_normal();
    db.name = norm.filename().empty() ? norm.parent_path().filename().string() : norm.filename().string();

    struct ManifestTable {
        std::string name;
        fs::path file;
        std::optional<std::vector<std::pair<std::string, LogicalType>>> columns;
    };
    std::vector<ManifestTable> entries;
    std::set<fs::path> claimed;

    const auto manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(read_file(manifest_path));
        } catch (const nlohmann::json::exception& e) {
            throw LoadError("manifest.json: " + std::string(e.what()));
        }
        if (manifest.contains("database")) {
            db.name = manifest.at("database").get<std::string>();
        }
        try {
            for (const auto& t : manifest.value("tables", nlohmann::json::array())) {
                ManifestTable entry;
                entry.name = t.at("name").get<std::string>();
                entry.file = dir / t.value("file", entry.name + ".csv");
                if (t.contains("columns")) {
                    std::vector<std::pair<std::string, LogicalType>> cols;
                    for (const auto& c : t.at("columns")) {
                        auto type_name = c.at("type").get<std::string>();
                        auto type = parse_logical_type(type_name);
                        if (!type) {
                            throw LoadError("manifest.json: unknown type '" + type_name + "'");
                        }
                        cols.emplace_back(c.at("name").get<std::string>(), *type);
                    }
                    entry.columns = std::move(cols);
                }
                claimed.insert(entry.file.lexically_normal());
                entries.push_back(std::move(entry));
            }
        } catch (const nlohmann::json::exception& e) {
            throw LoadError("manifest.json: " + std::string(e.what()));
        }
    }

    std::vector<fs::path> extra;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv" &&
            !claimed.count(entry.path().lexically_normal())) {
            extra.push_back(entry.path());
        }
    }
    std::sort(extra.begin(), extra.end());
    for (const auto& p : extra) {
        entries.push_back({p.stem().string(), p, std::nullopt});
    }
    if (entries.empty()) {
        throw LoadError("no tables found in " + dir.string());
    }
    for (auto& e : entries) {
        db.tables.push_back(type_table(read_csv_table(e.file, e.name, e.columns ? &*e.columns : nullptr)));
    }
    return db;
}

// ---- SQLite ----------------------------------------------------------------

struct SqliteCloser {
    void operator()(sqlite3* db) const { sqlite3_close(db); }
};
struct StmtFinalizer {
    void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using SqliteHandle = std::unique_ptr<sqlite3, SqliteCloser>;
using StmtHandle = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

StmtHandle prepare(sqlite3* db, const std::string& sql) {
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
        throw LoadError(std::string("sqlite: ") + sqlite3_errmsg(db));
    }
    return StmtHandle(stmt);
}

std::string quote_identifier(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        out.push_back(c);
        if (c == '"') {
            out.push_back('"');
        }
    }
    out.push_back('"');
    return out;
}

std::optional<LogicalType> declared_sqlite_type(std::string_view decl) {
    std::string d(decl);
    std::transform(d.begin(), d.end(), d.begin(), [](unsigned char c) { return std::toupper(c); });
    auto has = [&](std::string_view k) { return d.find(k) != std::string::npos; };
    if (d.empty()) {
        return std::nullopt;
    }
    if (has("BOOL") || d == "BIT") {
        return LogicalType::Boolean;
    }
    if (has("DATETIME") || has("TIMESTAMP")) {
        return LogicalType::DateTime;
    }
    if (has("DATE")) {
        return LogicalType::Date;
    }
    if (has("INT")) {
        return LogicalType::Integer;
    }
    if (has("DEC") || has("NUMERIC") || has("MONEY")) {
        return LogicalType::Decimal;
    }
    if (has("REAL") || has("FLOA") || has("DOUB")) {
        return LogicalType::Float;
    }
    if (has("CHAR") || has("CLOB") || has("TEXT") || has("UUID")) {
        return LogicalType::Text;
    }
    return std::nullopt;
}

RawCell read_sqlite_cell(sqlite3_stmt* stmt, int i, std::optional<LogicalType> declared) {
    switch (sqlite3_column_type(stmt, i)) {
    case SQLITE_NULL:
        return std::nullopt;
    case SQLITE_INTEGER:
        return std::to_string(sqlite3_column_int64(stmt, i));
    case SQLITE_FLOAT: {
        double v = sqlite3_column_double(stmt, i);
        // Integer-valued reals in an integer column are integers (SQLite affinity quirk).
        if (declared == LogicalType::Integer && v == static_cast<double>(static_cast<std::int64_t>(v))) {
            return std::to_string(static_cast<std::int64_t>(v));
        }
        return format_double(v);
    }
    case SQLITE_BLOB: {
        const auto* bytes = static_cast<const unsigned char*>(sqlite3_column_blob(stmt, i));
        int n = sqlite3_column_bytes(stmt, i);
        static constexpr char hex[] = "0123456789abcdef";
        std::string out;
        for (int k = 0; k < n; ++k) {
            out.push_back(hex[bytes[k] >> 4]);
            out.push_back(hex[bytes[k] & 15]);
        }
        return out;
    }
    default: {
        const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt, i));
        return std::string(text ? text : "", static_cast<std::size_t>(sqlite3_column_bytes(stmt, i)));
    }
    }
}

Database load_sqlite(const fs::path& path) {
    sqlite3* raw = nullptr;
    int rc = sqlite3_open_v2(path.c_str(), &raw, SQLITE_OPEN_READONLY, nullptr);
    SqliteHandle handle(raw);
    if (rc != SQLITE_OK) {
        throw LoadError("cannot open sqlite database " + path.string());
    }
    sqlite3* db = handle.get();

    Database out;
    out.name = path.stem().string();

    std::vector<std::string> names;
    {
        auto stmt = prepare(db, "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' "
                                "ORDER BY rowid");
        while (sqlite3_step(stmt.get()) == SQLITE_ROW) {
            names.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(stmt.get(), 0)));
        }
    }
    if (names.empty()) {
        throw LoadError("no tables found in " + path.string());
    }

    for (const auto& name : names) {
        RawTable rawt;
        rawt.name = name;
        {
            auto stmt = prepare(db, "PRAGMA table_info(" + quote_identifier(name) + ")");
            while (sqlite3_step(stmt.get()) == SQLITE_ROW) {
                rawt.column_names.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(stmt.get(), 1)));
                const auto* decl = reinterpret_cast<const char*>(sqlite3_column_text(stmt.get(), 2));
                rawt.declared.push_back(declared_sqlite_type(decl ? decl : ""));
            }
        }
        rawt.columns.assign(rawt.column_names.size(), {});
        auto stmt = prepare(db, "SELECT * FROM " + quote_identifier(name));
        int width = sqlite3_column_count(stmt.get());
        if (static_cast<std::size_t>(width) != rawt.column_names.size()) {
            throw LoadError("sqlite: column count mismatch in table " + name);
        }
        while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
            for (int i = 0; i < width; ++i) {
                rawt.columns[static_cast<std::size_t>(i)].push_back(
                    read_sqlite_cell(stmt.get(), i, rawt.declared[static_cast<std::size_t>(i)]));
            }
        }
        if (rc != SQLITE_DONE) {
            throw LoadError(std::string("sqlite: ") + sqlite3_errmsg(db));
        }
        out.tables.push_back(type_table(std::move(rawt)));
    }
    return out;
}

bool looks_like_sqlite(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    char header[16] = {};
    in.read(header, sizeof header);
    return in.gcount() == 16 && std::string_view(header, 15) == "SQLite format 3";
}

std::string csv_escape(const Value& v) {
    if (v.is_null()) {
        return {};
    }
    auto text = v.to_text();
    if (text.empty() || text.find_first_of(",\"\r\n") != std::string::npos) {
        std::string out = "\"";
        for (char c : text) {
            if (c == '"') {
                out.push_back('"');
            }
            out.push_back(c);
        }
        out.push_back('"');
        return out;
    }
    return text;
}

} // namespace

// ---- types -----------------------------------------------------------------

const Column* Table::find_column(std::string_view column) const {
    for (const auto& c : columns) {
        if (c.name == column) {
            return &c;
        }
    }
    return nullptr;
}

std::optional<std::size_t> Table::column_index(std::string_view column) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == column) {
            return i;
        }
    }
    return std::nullopt;
}

ColumnRef ColumnRef::parse(std::string_view text) {
    auto dot = text.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
        throw ResolveError("malformed column reference '" + std::string(text) + "' (expected table.column)");
    }
    return {std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

ColumnPair ColumnPair::parse(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw ResolveError("malformed pair '" + std::string(text) + "' (expected t1.c1:t2.c2)");
    }
    return {ColumnRef::parse(text.substr(0, colon)), ColumnRef::parse(text.substr(colon + 1))};
}

const Table* Database::find_table(std::string_view table) const {
    for (const auto& t : tables) {
        if (t.name == table) {
            return &t;
        }
    }
    return nullptr;
}

const Table& Database::table(std::string_view table) const {
    if (const auto* t = find_table(table)) {
        return *t;
    }
    throw ResolveError("unknown table '" + std::string(table) + "'");
}

const Column& Database::column(const ColumnRef& ref) const {
    const auto& t = table(ref.table);
    if (const auto* c = t.find_column(ref.column)) {
        return *c;
    }
    throw ResolveError("unknown column '" + ref.to_string() + "'");
}

std::size_t Database::column_count() const {
    std::size_t n = 0;
    for (const auto& t : tables) {
        n += t.columns.size();
    }
    return n;
}

void to_json(nlohmann::json& j, const ColumnRef& r) { j = {{"table", r.table}, {"column", r.column}}; }

void to_json(nlohmann::json& j, const ColumnPair& p) {
    j = {{"from_table", p.referencing.table},
         {"from_column", p.referencing.column},
         {"to_table", p.referenced.table},
         {"to_column", p.referenced.column}};
}

void to_json(nlohmann::json& j, const ColumnStats& s) {
    j = {{"table", s.table},
         {"column", s.column},
         {"ordinal", s.ordinal},
         {"type", std::string(to_string(s.type))},
         {"avg_text_len", s.avg_text_len},
         {"distinct_count", s.distinct_count},
         {"row_count", s.row_count},
         {"cardinality_ratio", s.cardinality_ratio},
         {"min_value", s.min_value ? nlohmann::json(*s.min_value) : nlohmann::json(nullptr)},
         {"max_value", s.max_value ? nlohmann::json(*s.max_value) : nlohmann::json(nullptr)}};
}

// ---- loading ---------------------------------------------------------------

void validate_database(const Database& db) {
    if (db.name.empty()) {
        throw LoadError("database name is empty");
    }
    std::set<std::string> table_names;
    for (const auto& t : db.tables) {
        if (!table_names.insert(lower(t.name)).second) {
            throw LoadError("duplicate table name '" + t.name + "'");
        }
        std::set<std::string> column_names;
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
            const auto& c = t.columns[i];
            if (!column_names.insert(c.name).second) {
                throw LoadError("duplicate column name '" + c.name + "' in table '" + t.name + "'");
            }
            if (c.ordinal != static_cast<int>(i) + 1) {
                throw LoadError("non-contiguous ordinal for column '" + t.name + "." + c.name + "'");
            }
            if (c.values.size() != t.row_count) {
                throw LoadError("column '" + t.name + "." + c.name + "' does not hold row_count values");
            }
            for (const auto& v : c.values) {
                if (v.is_null()) {
                    continue;
                }
                const auto& s = v.storage();
                bool ok = false;
                switch (c.type) {
                case LogicalType::Integer:
                    ok = std::holds_alternative<std::int64_t>(s);
                    break;
                case LogicalType::Float:
                case LogicalType::Decimal:
                    ok = std::holds_alternative<double>(s);
                    break;
                case LogicalType::Boolean:
                    ok = std::holds_alternative<bool>(s);
                    break;
                case LogicalType::Text:
                    ok = std::holds_alternative<std::string>(s);
                    break;
                case LogicalType::Date:
                    ok = std::holds_alternative<std::string>(s) && is_iso_date(std::get<std::string>(s));
                    break;
                case LogicalType::DateTime:
                    ok = std::holds_alternative<std::string>(s) &&
                         normalize_iso_datetime(std::get<std::string>(s)).has_value();
                    break;
                }
                if (!ok) {
                    throw LoadError("value '" + v.to_text() + "' in '" + t.name + "." + c.name +
                                    "' does not conform to type " + std::string(to_string(c.type)));
                }
            }
        }
    }
}

Database load_database(const fs::path& source) {
    std::error_code ec;
    Database db;
    if (fs::is_directory(source, ec)) {
        db = load_csv_directory(source);
    } else if (fs::is_regular_file(source, ec)) {
        if (!looks_like_sqlite(source)) {
            throw LoadError(source.string() + " is neither a SQLite database nor a CSV directory");
        }
        db = load_sqlite(source);
    } else {
        throw LoadError("cannot read data source " + source.string());
    }
    validate_database(db);
    return db;
}

// ---- statistics ------------------------------------------------------------

std::vector<Value> distinct_values(const Column& column) {
    std::vector<Value> out;
    out.reserve(column.values.size());
    for (const auto& v : column.values) {
        if (!v.is_null()) {
            out.push_back(v);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::size_t non_null_count(const Column& column) {
    return static_cast<std::size_t>(
        std::count_if(column.values.begin(), column.values.end(), [](const Value& v) { return !v.is_null(); }));
}

ColumnStats column_stats(const Table& table, const Column& column) {
    ColumnStats s;
    s.table = table.name;
    s.column = column.name;
    s.ordinal = column.ordinal;
    s.type = column.type;
    s.row_count = table.row_count;

    std::size_t non_null = 0;
    std::size_t total_len = 0;
    for (const auto& v : column.values) {
        if (v.is_null()) {
            continue;
        }
        ++non_null;
        total_len += utf8_length(v.to_text());
    }
    s.avg_text_len = non_null ? static_cast<double>(total_len) / static_cast<double>(non_null) : 0.0;

    auto distinct = distinct_values(column);
    s.distinct_count = distinct.size();
    s.cardinality_ratio =
        s.row_count ? static_cast<double>(s.distinct_count) / static_cast<double>(s.row_count) : 0.0;
    if (!distinct.empty()) {
        s.min_value = distinct.front();
        s.max_value = distinct.back();
    }
    return s;
}

ColumnStats column_stats(const Database& db, const ColumnRef& col) {
    const auto& t = db.table(col.table);
    const auto* c = t.find_column(col.column);
    if (!c) {
        throw ResolveError("unknown column '" + col.to_string() + "'");
    }
    return column_stats(t, *c);
}

std::vector<Row> sample_rows(const Table& table, std::size_t n) {
    const auto count = std::min(n, table.row_count);
    std::vector<Row> rows(count);
    for (std::size_t r = 0; r < count; ++r) {
        rows[r].reserve(table.columns.size());
        for (const auto& c : table.columns) {
            rows[r].push_back(c.values[r]);
        }
    }
    return rows;
}

std::vector<Row> sample_rows(const Database& db, std::string_view table, std::size_t n) {
    return sample_rows(db.table(table), n);
}

void write_csv_directory(const Database& db, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["database"] = db.name;
    manifest["tables"] = nlohmann::json::array();
    for (const auto& t : db.tables) {
        nlohmann::json cols = nlohmann::json::array();
        std::ofstream out(dir / (t.name + ".csv"), std::ios::binary);
        if (!out) {
            throw LoadError("cannot write " + (dir / (t.name + ".csv")).string());
        }
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
            out << (i ? "," : "") << csv_escape(Value::text(t.columns[i].name));
            cols.push_back({{"name", t.columns[i].name}, {"type", std::string(to_string(t.columns[i].type))}});
        }
        out << "\n";
        for (std::size_t r = 0; r < t.row_count; ++r) {
            for (std::size_t i = 0; i < t.columns.size(); ++i) {
                out << (i ? "," : "") << csv_escape(t.columns[i].values[r]);
            }
            out << "\n";
        }
        manifest["tables"].push_back({{"name", t.name}, {"file", t.name + ".csv"}, {"columns", cols}});
    }
    std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << "\n";
}

} // namespace fkd
