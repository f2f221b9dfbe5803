#include "fkd/value.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace fkd {

namespace {

constexpr std::array<std::pair<LogicalType, std::string_view>, 7> kTypeNames{{
    {LogicalType::Integer, "integer"},
    {LogicalType::Float, "float"},
    {LogicalType::Decimal, "decimal"},
    {LogicalType::Text, "text"},
    {LogicalType::Boolean, "boolean"},
    {LogicalType::Date, "date"},
    {LogicalType::DateTime, "datetime"},
}};

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

} // namespace

std::string_view to_string(LogicalType type) {
    for (const auto& [t, name] : kTypeNames) {
        if (t == type) {
            return name;
        }
    }
    return "unknown";
}

std::optional<LogicalType> parse_logical_type(std::string_view name) {
    const auto key = lower(name);
    for (const auto& [t, n] : kTypeNames) {
        if (n == key) {
            return t;
        }
    }
    if (key == "int" || key == "bigint") {
        return LogicalType::Integer;
    }
    if (key == "bool") {
        return LogicalType::Boolean;
    }
    if (key == "string" || key == "varchar") {
        return LogicalType::Text;
    }
    return std::nullopt;
}

std::optional<std::int64_t> Value::as_integer() const {
    if (auto p = std::get_if<std::int64_t>(&data_)) {
        return *p;
    }
    return std::nullopt;
}

std::optional<double> Value::as_number() const {
    if (auto p = std::get_if<std::int64_t>(&data_)) {
        return static_cast<double>(*p);
    }
    if (auto p = std::get_if<double>(&data_)) {
        return *p;
    }
    return std::nullopt;
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) {
        return "nan";
    }
    return std::string(buf.data(), ptr);
}

std::string Value::to_text() const {
    struct Visitor {
        std::string operator()(std::monostate) const { return "NULL"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const std::string& v) const { return v; }
    };
    return std::visit(Visitor{}, data_);
}

void to_json(nlohmann::json& j, const Value& v) {
    struct Visitor {
        nlohmann::json operator()(std::monostate) const { return nullptr; }
        nlohmann::json operator()(std::int64_t x) const { return x; }
        nlohmann::json operator()(double x) const { return x; }
        nlohmann::json operator()(bool x) const { return x; }
        nlohmann::json operator()(const std::string& x) const { return x; }
    };
    j = std::visit(Visitor{}, v.storage());
}

bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
        return false;
    }
    if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) || !all_digits(s.substr(8, 2))) {
        return false;
    }
    int month = (s[5] - '0') * 10 + (s[6] - '0');
    int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::optional<std::string> normalize_iso_datetime(std::string_view s) {
    if (s.size() < 19 || !is_iso_date(s.substr(0, 10)) || (s[10] != ' ' && s[10] != 'T')) {
        return std::nullopt;
    }
    auto time = s.substr(11, 8);
    if (time[2] != ':' || time[5] != ':' || !all_digits(time.substr(0, 2)) || !all_digits(time.substr(3, 2)) ||
        !all_digits(time.substr(6, 2))) {
        return std::nullopt;
    }
    auto rest = s.substr(19);
    if (!rest.empty() && (rest[0] != '.' || !all_digits(rest.substr(1)))) {
        return std::nullopt;
    }
    std::string out(s);
    out[10] = ' ';
    return out;
}

std::optional<Value> convert_text(std::string_view raw, LogicalType type) {
    if (type == LogicalType::Text) {
        return Value::text(std::string(raw));
    }
    const auto s = trim(raw);
    switch (type) {
    case LogicalType::Integer: {
        std::int64_t v = 0;
        const char* first = s.data();
        if (!s.empty() && s[0] == '+') {
            ++first;
        }
        auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
        if (ec == std::errc{} && ptr == s.data() + s.size() && first != ptr) {
            return Value::integer(v);
        }
        return std::nullopt;
    }
    case LogicalType::Float:
    case LogicalType::Decimal: {
        double v = 0;
        const char* first = s.data();
        if (!s.empty() && s[0] == '+') {
            ++first;
        }
        auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
        if (ec == std::errc{} && ptr == s.data() + s.size() && first != ptr && std::isfinite(v)) {
            return Value::real(v);
        }
        return std::nullopt;
    }
    case LogicalType::Boolean: {
        const auto k = lower(s);
        if (k == "true" || k == "t" || k == "1" || k == "yes") {
            return Value::boolean(true);
        }
        if (k == "false" || k == "f" || k == "0" || k == "no") {
            return Value::boolean(false);
        }
        return std::nullopt;
    }
    case LogicalType::Date:
        if (is_iso_date(s)) {
            return Value::text(s);
        }
        return std::nullopt;
    case LogicalType::DateTime:
        if (auto norm = normalize_iso_datetime(s)) {
            return Value::text(*norm);
        }
        return std::nullopt;
    case LogicalType::Text:
        break;
    }
    return std::nullopt;
}

} // namespace fkd
