#include "labharm/config.hpp"

#include <charconv>
#include <fstream>

#include "labharm/error.hpp"
#include "labharm/text.hpp"

namespace labharm {

ConfigFile ConfigFile::parse(std::istream& in) {
    ConfigFile cfg;
    std::string line, section;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ParseError("config line " + std::to_string(n) + ": unterminated section");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            if (section.empty()) throw ParseError("config line " + std::to_string(n) + ": empty section name");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(n) + ": expected key = value");
        const auto key = trim(std::string_view(t).substr(0, eq));
        auto value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw ParseError("config line " + std::to_string(n) + ": empty key");
        if (!value.empty() && value.front() == '"') {
            const auto close = value.find('"', 1);
            if (close == std::string::npos) throw ParseError("config line " + std::to_string(n) + ": unterminated string");
            value = value.substr(1, close - 1);
        } else if (const auto hash = value.find(" #"); hash != std::string::npos) {
            value = trim(std::string_view(value).substr(0, hash));
        }
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open config " + path.string());
    auto cfg = parse(in);
    cfg.base_dir_ = path.parent_path();
    return cfg;
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_[key] = true;
    return it->second;
}

std::string ConfigFile::get_or(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    double out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) throw ParseError("config " + key + ": not a number");
    return out;
}

long long ConfigFile::get_int(const std::string& key, long long fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    long long out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) throw ParseError("config " + key + ": not an integer");
    return out;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw ParseError("config " + key + ": expected true or false");
}

std::vector<std::string> ConfigFile::unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
        if (!used_.count(k)) out.push_back(k);
    }
    return out;
}

}  // namespace labharm
