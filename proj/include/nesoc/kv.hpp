#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nesoc/error.hpp"

namespace nesoc::kv {

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

/// Splits on commas and/or whitespace, dropping empty items.
inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::string item;
    for (char c : s) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else {
            item.push_back(c);
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(s.substr(start));
            break;
        }
        parts.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

/// One `key = value` entry. Order of appearance is preserved.
struct Entry {
    std::string key;
    std::string value;
    size_t line = 0;
};

/// Parses line-oriented `key = value` text. `#` starts a comment,
/// blank lines are ignored. Later entries for a key override earlier ones
/// when queried through `get`.
class KvFile {
public:
    static KvFile parse(std::istream& in) {
        KvFile kv;
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::string t = trim(line);
            if (t.empty()) continue;
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError("expected 'key = value', got: " + t, lineno);
            Entry e;
            e.key = trim(t.substr(0, eq));
            e.value = trim(t.substr(eq + 1));
            e.line = lineno;
            if (e.key.empty())
                throw ParseError("empty key", lineno);
            kv.entries_.push_back(std::move(e));
        }
        return kv;
    }

    static KvFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open file: " + path);
        return parse(in);
    }

    bool has(std::string_view key) const {
        return std::any_of(entries_.begin(), entries_.end(),
                           [&](const Entry& e) { return e.key == key; });
    }

    std::string get(std::string_view key, std::string fallback = "") const {
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
            if (it->key == key) return it->value;
        return fallback;
    }

    /// Comma- or whitespace-separated list value.
    std::vector<std::string> get_list(std::string_view key) const {
        return split_list(get(key));
    }

    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
};

} // namespace nesoc::kv
