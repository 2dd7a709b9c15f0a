#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vfl/csv.hpp"
#include "vfl/errors.hpp"

// Minimal TOML subset: top-level or [section] scoped `key = value` pairs
// where value is a number, boolean, "string", or (nested) array of values.
// Covers the flat configuration and parameter files this tool reads; it is
// not a general TOML implementation.
namespace vfl::toml {

struct Value {
    enum class Kind { Number, Boolean, String, Array } kind = Kind::Number;
    double number = 0.0;
    bool boolean = false;
    std::string string;
    std::vector<Value> array;
};

using Document = std::map<std::string, Value>;

namespace detail {

inline void skip_ws(std::string_view s, std::size_t& i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline Value parse_value(std::string_view s, std::size_t& i, const std::string& ctx);

inline Value parse_array(std::string_view s, std::size_t& i, const std::string& ctx) {
    Value v;
    v.kind = Value::Kind::Array;
    ++i;  // consume '['
    skip_ws(s, i);
    if (i < s.size() && s[i] == ']') {
        ++i;
        return v;
    }
    for (;;) {
        v.array.push_back(parse_value(s, i, ctx));
        skip_ws(s, i);
        if (i >= s.size()) throw FormatError(ctx + ": unterminated array");
        if (s[i] == ',') {
            ++i;
            skip_ws(s, i);
            if (i < s.size() && s[i] == ']') {  // trailing comma
                ++i;
                return v;
            }
            continue;
        }
        if (s[i] == ']') {
            ++i;
            return v;
        }
        throw FormatError(ctx + ": expected ',' or ']' in array");
    }
}

inline Value parse_value(std::string_view s, std::size_t& i, const std::string& ctx) {
    skip_ws(s, i);
    if (i >= s.size()) throw FormatError(ctx + ": missing value");
    const char c = s[i];
    if (c == '[') return parse_array(s, i, ctx);
    Value v;
    if (c == '"') {
        v.kind = Value::Kind::String;
        ++i;
        while (i < s.size() && s[i] != '"') v.string.push_back(s[i++]);
        if (i >= s.size()) throw FormatError(ctx + ": unterminated string");
        ++i;
        return v;
    }
    std::size_t start = i;
    while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != '#' && s[i] != ' ' && s[i] != '\t')
        ++i;
    std::string_view tok = s.substr(start, i - start);
    if (tok == "true" || tok == "false") {
        v.kind = Value::Kind::Boolean;
        v.boolean = (tok == "true");
        return v;
    }
    v.kind = Value::Kind::Number;
    v.number = csv::parse_double(tok, ctx);
    return v;
}

}  // namespace detail

inline Document parse(std::istream& in, const std::string& ctx) {
    Document doc;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = ctx + ":" + std::to_string(lineno);
        std::size_t i = 0;
        detail::skip_ws(line, i);
        if (i >= line.size() || line[i] == '#') continue;
        if (line[i] == '[') {
            const std::size_t close = line.find(']', i);
            if (close == std::string::npos) throw FormatError(where + ": bad section header");
            section = line.substr(i + 1, close - i - 1);
            continue;
        }
        const std::size_t eq = line.find('=', i);
        if (eq == std::string::npos) throw FormatError(where + ": expected 'key = value'");
        std::string key = line.substr(i, eq - i);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        if (key.empty()) throw FormatError(where + ": empty key");
        std::size_t vi = eq + 1;
        Value v = detail::parse_value(line, vi, where);
        detail::skip_ws(line, vi);
        if (vi < line.size() && line[vi] != '#')
            throw FormatError(where + ": trailing characters after value");
        doc[section.empty() ? key : section + "." + key] = std::move(v);
    }
    return doc;
}

inline Document parse_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open '" + path + "'");
    return parse(f, path);
}

inline double number_at(const Document& doc, const std::string& key, double fallback) {
    auto it = doc.find(key);
    if (it == doc.end()) return fallback;
    if (it->second.kind != Value::Kind::Number)
        throw FormatError("TOML key '" + key + "' is not a number");
    return it->second.number;
}

}  // namespace vfl::toml
