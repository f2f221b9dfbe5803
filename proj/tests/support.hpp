#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fkd/schema_store.hpp"

namespace fkd::testing {

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / ("fkd-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

inline std::vector<Value> ints(std::initializer_list<std::int64_t> v) {
    std::vector<Value> out;
    for (auto x : v) {
        out.push_back(Value::integer(x));
    }
    return out;
}

inline std::vector<Value> texts(std::initializer_list<const char*> v) {
    std::vector<Value> out;
    for (auto x : v) {
        out.push_back(Value::text(x));
    }
    return out;
}

struct ColumnSpec {
    std::string name;
    LogicalType type;
    std::vector<Value> values;
};

inline Table make_table(std::string name, std::vector<ColumnSpec> cols) {
    Table t{std::move(name), {}, cols.empty() ? 0 : cols.front().values.size()};
    int ordinal = 1;
    for (auto& c : cols) {
        t.columns.push_back({std::move(c.name), ordinal++, c.type, std::move(c.values)});
    }
    return t;
}

inline ColumnPair pair(const std::string& text) { return ColumnPair::parse(text); }

} // namespace fkd::testing
