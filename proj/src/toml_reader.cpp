#include "toml_reader.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include "kdsynth/errors.hpp"

namespace kdsynth::toml {

namespace {

class Cursor {
public:
    Cursor(std::string_view text, std::string_view origin) : text_(text), origin_(origin) {}

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }
    char get() {
        char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }
    int line() const { return line_; }

    [[noreturn]] void fail(const std::string& message) const {
        throw ParseError(std::string(origin_) + ":" + std::to_string(line_) + ": " + message);
    }

    // Skips spaces/tabs and, when allowed, newlines and comments.
    void skip_ws(bool newlines) {
        while (!eof()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r') {
                get();
            } else if (newlines && c == '\n') {
                get();
            } else if (newlines && c == '#') {
                skip_comment();
            } else {
                break;
            }
        }
    }

    void skip_comment() {
        while (!eof() && peek() != '\n') get();
    }

    // Rest of the line must be blank or a comment.
    void expect_line_end() {
        skip_ws(false);
        if (peek() == '#') skip_comment();
        if (!eof() && peek() != '\n') fail(std::string("unexpected character '") + peek() + "'");
        if (!eof()) get();
    }

    std::string bare_key() {
        std::string key;
        while (!eof()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
                key.push_back(get());
            } else {
                break;
            }
        }
        return key;
    }

    std::string key() {
        if (peek() == '"') return basic_string();
        std::string k = bare_key();
        if (k.empty()) fail("expected a key");
        return k;
    }

    std::string basic_string() {
        get(); // opening quote
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = get();
            if (c == '"') break;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (eof()) fail("unterminated escape");
            char e = get();
            switch (e) {
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            default: fail(std::string("unsupported escape \\") + e);
            }
        }
        return out;
    }

    Value value() {
        Value v;
        v.line = line_;
        char c = peek();
        if (c == '"') {
            v.data = basic_string();
        } else if (c == '[') {
            v.data = array();
        } else if (c == '{') {
            v.data = inline_table();
        } else if (c == 't' || c == 'f') {
            std::string word = bare_key();
            if (word == "true") {
                v.data = true;
            } else if (word == "false") {
                v.data = false;
            } else {
                fail("invalid value '" + word + "'");
            }
        } else {
            v.data = number();
        }
        return v;
    }

    std::variant<bool, std::int64_t, double, std::string, Array, InlineTable> number() {
        std::string tok;
        while (!eof()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' ||
                c == '_') {
                tok.push_back(get());
            } else {
                break;
            }
        }
        if (tok.empty()) fail("expected a value");
        std::string clean;
        for (char c : tok)
            if (c != '_') clean.push_back(c);
        bool is_float = clean.find_first_of(".eE") != std::string::npos || clean == "inf" ||
                        clean == "+inf" || clean == "-inf" || clean == "nan";
        if (!is_float) {
            std::int64_t out = 0;
            const char* first = clean.data() + (clean[0] == '+' ? 1 : 0);
            auto [ptr, ec] = std::from_chars(first, clean.data() + clean.size(), out);
            if (ec != std::errc() || ptr != clean.data() + clean.size())
                fail("invalid number '" + tok + "'");
            return out;
        }
        char* end = nullptr;
        double d = std::strtod(clean.c_str(), &end);
        if (end != clean.c_str() + clean.size()) fail("invalid number '" + tok + "'");
        return d;
    }

    Array array() {
        get(); // [
        Array out;
        skip_ws(true);
        while (peek() != ']') {
            if (eof()) fail("unterminated array");
            out.push_back(value());
            skip_ws(true);
            if (peek() == ',') {
                get();
                skip_ws(true);
            } else if (peek() != ']') {
                fail("expected ',' or ']' in array");
            }
        }
        get(); // ]
        return out;
    }

    InlineTable inline_table() {
        get(); // {
        InlineTable out;
        skip_ws(false);
        while (peek() != '}') {
            if (eof() || peek() == '\n') fail("unterminated inline table");
            std::string k = key();
            skip_ws(false);
            if (peek() != '=') fail("expected '=' after key '" + k + "'");
            get();
            skip_ws(false);
            for (const auto& [existing, _] : out)
                if (existing == k) fail("duplicate key '" + k + "'");
            out.emplace_back(k, value());
            skip_ws(false);
            if (peek() == ',') {
                get();
                skip_ws(false);
            } else if (peek() != '}') {
                fail("expected ',' or '}' in inline table");
            }
        }
        get(); // }
        return out;
    }

private:
    std::string_view text_;
    std::string_view origin_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

} // namespace

Document parse(std::string_view text, std::string_view origin) {
    Document doc;
    doc.tables.push_back(Table{});
    Cursor cur(text, origin);
    while (true) {
        cur.skip_ws(true);
        if (cur.eof()) break;
        if (cur.peek() == '[') {
            int line = cur.line();
            cur.get();
            bool is_array = false;
            if (cur.peek() == '[') {
                cur.get();
                is_array = true;
            }
            cur.skip_ws(false);
            std::string name = cur.key();
            cur.skip_ws(false);
            if (cur.peek() != ']') cur.fail("expected ']' after table name");
            cur.get();
            if (is_array) {
                if (cur.peek() != ']') cur.fail("expected ']]' after table name");
                cur.get();
            }
            cur.expect_line_end();
            doc.tables.push_back(Table{name, is_array, line, {}});
            continue;
        }
        int line = cur.line();
        std::string k = cur.key();
        cur.skip_ws(false);
        if (cur.peek() != '=') cur.fail("expected '=' after key '" + k + "'");
        cur.get();
        cur.skip_ws(false);
        Table& table = doc.tables.back();
        for (const auto& e : table.entries)
            if (e.key == k) cur.fail("duplicate key '" + k + "'");
        Value v = cur.value();
        table.entries.push_back(Entry{k, std::move(v), line});
        cur.expect_line_end();
    }
    return doc;
}

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

} // namespace kdsynth::toml
