#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace afp {

// Flat key-value configuration. Format: one `key = value` per line,
// '#' starts a comment, keys use dotted section prefixes
// (e.g. `scenegen.clutter_max = 10`). Later assignments win, which is how
// CLI overrides are layered on top of file contents.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig load(const std::filesystem::path& path);
    void parse_line(const std::string& line, const std::string& where);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Required variants throw ConfigError when the key is absent.
    double require_double(const std::string& key) const;
    std::int64_t require_int(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    std::string serialize() const;

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace afp
