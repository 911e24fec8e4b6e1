#pragma once

#include <map>
#include <string>
#include <vector>

namespace seastereo {

// Flat `key = value` config files. '#' starts a comment, blank lines are
// skipped. Values keep everything after the first '=' (trimmed), so lists
// are comma-separated strings parsed by the typed getters.
class KvConfig {
public:
    KvConfig() = default;
    static KvConfig from_file(const std::string& path);
    static KvConfig from_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require_str(const std::string& key) const;
    double get_num(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_num_list(const std::string& key,
                                     const std::vector<double>& fallback) const;
    std::vector<std::string> get_str_list(const std::string& key,
                                          const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace seastereo
