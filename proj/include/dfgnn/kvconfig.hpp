#pragma once

// Flat key-value text with [section] headers:
//
//   [model]
//   embed_dim = 64
//
// Keys are addressed as "section.key". Serialization is sorted, so equal
// configs produce equal bytes.

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "dfgnn/error.hpp"

namespace dfgnn {

class KeyValues {
public:
    static KeyValues parse(std::istream& in) {
        KeyValues kv;
        std::string line, section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == '#' || line[b] == ';') continue;
            const auto e = line.find_last_not_of(" \t\r");
            line = line.substr(b, e - b + 1);
            if (line.front() == '[') {
                if (line.back() != ']') throw InputError("config line " + std::to_string(lineno) + ": unterminated section");
                section = line.substr(1, line.size() - 2);
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
            auto strip = [](std::string s) {
                const auto sb = s.find_first_not_of(" \t");
                if (sb == std::string::npos) return std::string{};
                return s.substr(sb, s.find_last_not_of(" \t") - sb + 1);
            };
            const std::string key = strip(line.substr(0, eq));
            if (key.empty()) throw InputError("config line " + std::to_string(lineno) + ": empty key");
            kv.set(section.empty() ? key : section + "." + key, strip(line.substr(eq + 1)));
        }
        return kv;
    }

    static KeyValues parse(const std::string& text) {
        std::istringstream is(text);
        return parse(is);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& entries() const { return values_; }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw InputError("missing config key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key) const {
        const auto& v = get(key);
        double out = 0.0;
        const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || end != v.data() + v.size())
            throw InputError("config key '" + key + "': expected a number, got '" + v + "'");
        return out;
    }

    std::uint64_t get_uint(const std::string& key) const {
        const auto& v = get(key);
        std::uint64_t out = 0;
        const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || end != v.data() + v.size())
            throw InputError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
        return out;
    }

    bool get_bool(const std::string& key) const {
        const auto& v = get(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw InputError("config key '" + key + "': expected true or false, got '" + v + "'");
    }

    std::string serialize() const {
        std::ostringstream os;
        std::string current;
        bool first = true;
        for (const auto& [key, value] : values_) {
            const auto dot = key.find('.');
            const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
            const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
            if (first || section != current) {
                if (!first) os << '\n';
                if (!section.empty()) os << '[' << section << "]\n";
                current = section;
                first = false;
            }
            os << name << " = " << value << '\n';
        }
        return os.str();
    }

private:
    std::map<std::string, std::string> values_;
};

/// Shortest text that reads back to the same double.
inline std::string format_number(double x) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

/// 64-bit FNV-1a, used as a stable config digest.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex_digest(const std::string& s) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << fnv1a64(s);
    return os.str();
}

} // namespace dfgnn
