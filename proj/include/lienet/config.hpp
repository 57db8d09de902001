#pragma once

// Line-oriented `key = value` run configuration with one section per
// command. Flags override file values; the effective configuration is echoed
// into the output directory so a run can be reproduced from its echo alone.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "lienet/errors.hpp"

namespace lienet {

/// Flat map keyed by "section.key". Keys outside any [section] live in the
/// "global" section.
class RunConfig {
  public:
    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError(path + ": cannot open config file");
        std::string line;
        std::string section = "global";
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string trimmed = trim(strip_comment(line));
            if (trimmed.empty()) continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']' || trimmed.size() < 3) {
                    throw ConfigError(path + ":" + std::to_string(line_no) +
                                      ": malformed section header");
                }
                section = trimmed.substr(1, trimmed.size() - 2);
                continue;
            }
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": expected key = value");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
            }
            values_[section + "." + key] = value;
        }
    }

    /// Flag overrides land on top of whatever the file set.
    void set(const std::string& dotted_key, const std::string& value) {
        values_[dotted_key] = value;
    }

    bool has(const std::string& dotted_key) const {
        return values_.count(dotted_key) > 0;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            throw ConfigError("missing required config key '" + key + "'");
        }
        return it->second;
    }

    long get_int(const std::string& key, long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            size_t pos = 0;
            const long v = std::stol(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (...) {
            throw ConfigError("config key '" + key + "': expected integer, got '" +
                              it->second + "'");
        }
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (...) {
            throw ConfigError("config key '" + key + "': expected number, got '" +
                              it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
        if (v == "0" || v == "false" || v == "off" || v == "no") return false;
        throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
    }

    /// Writes the effective configuration, grouped by section in sorted
    /// order. Reloading the echo reproduces this object exactly.
    void write_echo(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError(path + ": cannot open for writing");
        std::string current;
        for (const auto& [dotted, value] : values_) {
            const auto dot = dotted.find('.');
            const std::string section = dotted.substr(0, dot);
            const std::string key = dotted.substr(dot + 1);
            if (section != current) {
                if (!current.empty()) out << "\n";
                out << "[" << section << "]\n";
                current = section;
            }
            out << key << " = " << value << "\n";
        }
    }

    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    static std::string strip_comment(const std::string& s) {
        const auto hash = s.find('#');
        return hash == std::string::npos ? s : s.substr(0, hash);
    }
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace lienet
