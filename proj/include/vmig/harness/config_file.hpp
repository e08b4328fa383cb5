#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vmig/error.hpp"

namespace vmig::harness {

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// Flat `section.key = value` lines; `#` starts a comment.
inline std::vector<ConfigEntry> parse_config_text(const std::string& text, const std::string& origin = "<config>") {
    std::vector<ConfigEntry> out;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(std::string_view(raw).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const auto where = origin + ":" + std::to_string(line);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        ConfigEntry e{trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)), line};
        const bool valid_key = !e.key.empty() && std::all_of(e.key.begin(), e.key.end(), [](char c) {
            return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
                   c == '_' || c == '.';
        });
        if (!valid_key) throw ConfigError(where + ": malformed key '" + e.key + "'");
        for (const auto& prev : out)
            if (prev.key == e.key)
                throw ConfigError(e.key + ": set twice (" + origin + " lines " + std::to_string(prev.line) + " and " +
                                  std::to_string(line) + ")");
        out.push_back(std::move(e));
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline std::vector<ConfigEntry> parse_config_file(const std::string& path) {
    return parse_config_text(read_text_file(path), path);
}

// Scalar conversions; `key` only decorates error messages.

inline double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a number, got '" + text + "'");
    return v;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
    long long v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return v;
}

inline int parse_int(const std::string& key, const std::string& text) {
    const auto v = parse_integer(key, text);
    if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(key + ": integer out of range");
    return static_cast<int>(v);
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

// Comma-separated list; empty text is an empty list.
inline std::vector<std::string> split_list(const std::string& text, char sep = ',') {
    std::vector<std::string> out;
    if (trim(text).empty()) return out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace vmig::harness
