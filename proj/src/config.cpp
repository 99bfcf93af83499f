#include "sarl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sarl {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Config Config::parse_text(const std::string& text, const std::string& source) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string loc = source + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw ConfigError(loc + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(loc + ": empty key");
        cfg.values_[key] = value;
        cfg.origin_[key] = loc;
    }
    return cfg;
}

Config Config::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
    values_[key] = value;
    origin_[key] = "command line";
}

std::string Config::where(const std::string& key) const {
    auto it = origin_.find(key);
    return it == origin_.end() ? key : key + " (" + it->second + ")";
}

void Config::require_known(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_)
        if (!known.count(key)) throw ConfigError("unknown config key " + where(key));
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::optional<double> Config::get_optional_double(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const std::string& s = it->second;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError(where(key) + ": expected a number, got '" + s + "'");
    return v;
}

std::optional<std::size_t> Config::get_optional_size(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const std::string& s = it->second;
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError(where(key) + ": expected a non-negative integer, got '" + s + "'");
    return v;
}

double Config::get_double(const std::string& key, double fallback) const {
    return get_optional_double(key).value_or(fallback);
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
    return get_optional_size(key).value_or(fallback);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError(where(key) + ": expected an unsigned integer, got '" + s + "'");
    return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError(where(key) + ": expected true/false, got '" + it->second + "'");
}

std::vector<double> Config::get_double_list(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size() || !std::isfinite(v))
            throw ConfigError(where(key) + ": expected a list of numbers, got '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key,
                                               std::vector<std::size_t> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::size_t> out;
    for (const auto& item : split_list(it->second)) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size())
            throw ConfigError(where(key) + ": expected a list of integers, got '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key,
                                                 std::vector<std::string> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return split_list(it->second);
}

}  // namespace sarl
