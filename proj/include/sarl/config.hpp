#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sarl {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat `dotted.key = value` text config. Blank lines and `#` comments are
// ignored. Later assignments (including command-line overrides) win.
class Config {
public:
    static Config parse_text(const std::string& text, const std::string& source = "<text>");
    static Config parse_file(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void require_known(const std::set<std::string>& known) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::optional<double> get_optional_double(const std::string& key) const;
    std::optional<std::size_t> get_optional_size(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const;
    std::vector<std::size_t> get_size_list(const std::string& key, std::vector<std::size_t> fallback) const;
    std::vector<std::string> get_string_list(const std::string& key, std::vector<std::string> fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // "key (file:line)" for diagnostics.
    std::string where(const std::string& key) const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> origin_;
};

std::vector<std::string> split_list(const std::string& text);

}  // namespace sarl
