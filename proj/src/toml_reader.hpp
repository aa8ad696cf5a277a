#pragma once
// Reader for the TOML subset used by knowledge base files: comments,
// [table] / [[array-of-tables]] headers, and key = value pairs whose values
// are strings, integers, floats, booleans, arrays and single-line inline tables.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace kdsynth::toml {

struct Value;
using Array = std::vector<Value>;
using InlineTable = std::vector<std::pair<std::string, Value>>;

struct Value {
    std::variant<bool, std::int64_t, double, std::string, Array, InlineTable> data;
    int line = 0;
};

struct Entry {
    std::string key;
    Value value;
    int line = 0;
};

struct Table {
    std::string name; // empty for the root table
    bool is_array = false;
    int line = 0;
    std::vector<Entry> entries;
};

struct Document {
    std::vector<Table> tables; // tables[0] is the root table
};

// Throws ParseError with "<origin>:<line>: <message>".
Document parse(std::string_view text, std::string_view origin);

std::string quote(std::string_view s);

} // namespace kdsynth::toml
