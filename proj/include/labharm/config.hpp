#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace labharm {

/// Minimal TOML-style file: `[section]` headers, `key = value` lines, '#'
/// comments. Values may be bare or double-quoted; keys are addressed as
/// "section.key" (top-level keys have no prefix).
class ConfigFile {
public:
    static ConfigFile parse(std::istream& in);  // throws ParseError
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;     // throws ParseError
    long long get_int(const std::string& key, long long fallback) const;  // throws ParseError
    bool get_bool(const std::string& key, bool fallback) const;           // throws ParseError
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    /// Keys that were never read; helps report typos.
    std::vector<std::string> unused() const;
    const std::filesystem::path& base_dir() const { return base_dir_; }

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> used_;
    std::filesystem::path base_dir_;
};

}  // namespace labharm
