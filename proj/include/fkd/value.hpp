#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"

namespace fkd {

enum class LogicalType { Integer, Float, Decimal, Text, Boolean, Date, DateTime };

std::string_view to_string(LogicalType type);
std::optional<LogicalType> parse_logical_type(std::string_view name);

/// A nullable cell. Integers are int64, float/decimal are double, dates and
/// datetimes are ISO text ("YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS[.fff]") so that
/// lexicographic order is chronological order.
class Value {
public:
    using Storage = std::variant<std::monostate, std::int64_t, double, bool, std::string>;

    Value() = default;

    static Value null() { return Value{}; }
    static Value integer(std::int64_t v) { return Value{Storage{v}}; }
    static Value real(double v) { return Value{Storage{v}}; }
    static Value boolean(bool v) { return Value{Storage{v}}; }
    static Value text(std::string v) { return Value{Storage{std::move(v)}}; }

    bool is_null() const { return std::holds_alternative<std::monostate>(data_); }
    const Storage& storage() const { return data_; }

    std::optional<std::int64_t> as_integer() const;
    std::optional<double> as_number() const;

    /// Canonical rendering used for text-length statistics and prompts.
    /// Null renders as "NULL".
    std::string to_text() const;

    friend bool operator==(const Value& a, const Value& b) { return a.data_ == b.data_; }
    friend bool operator<(const Value& a, const Value& b) { return a.data_ < b.data_; }
    friend bool operator<=(const Value& a, const Value& b) { return !(b < a); }

private:
    explicit Value(Storage s) : data_(std::move(s)) {}
    Storage data_;
};

void to_json(nlohmann::json& j, const Value& v);

// Text -> typed value conversion. Returns nullopt when the text does not
// conform to the type.
std::optional<Value> convert_text(std::string_view text, LogicalType type);

bool is_iso_date(std::string_view s);
// Accepts 'T' or ' ' as separator; returns the space-separated canonical form.
std::optional<std::string> normalize_iso_datetime(std::string_view s);

std::string format_double(double v);

} // namespace fkd
