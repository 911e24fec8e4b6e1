#include "seastereo/kvconfig.hpp"

#include <fstream>
#include <sstream>

#include "seastereo/error.hpp"

namespace seastereo {

namespace {
std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}
}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) raise(ErrorCode::Config, "cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return from_string(ss.str());
    } catch (const Error& e) {
        raise(ErrorCode::Config, path + ": " + e.what());
    }
}

KvConfig KvConfig::from_string(const std::string& text) {
    KvConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorCode::Config,
                  "line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            raise(ErrorCode::Config, "line " + std::to_string(lineno) + ": empty key");
        cfg.kv_[key] = val;
    }
    return cfg;
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::string KvConfig::require_str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) raise(ErrorCode::Config, "missing required key: " + key);
    return it->second;
}

double KvConfig::get_num(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        raise(ErrorCode::Config, "key '" + key + "': not a number: " + it->second);
    }
}

int KvConfig::get_int(const std::string& key, int fallback) const {
    double v = get_num(key, double(fallback));
    int i = int(v);
    if (double(i) != v)
        raise(ErrorCode::Config, "key '" + key + "': expected an integer");
    return i;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    raise(ErrorCode::Config, "key '" + key + "': not a boolean: " + v);
}

std::vector<double> KvConfig::get_num_list(const std::string& key,
                                           const std::vector<double>& fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    for (const auto& tok : split_commas(it->second)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            raise(ErrorCode::Config, "key '" + key + "': not a number: " + tok);
        }
    }
    if (out.empty()) raise(ErrorCode::Config, "key '" + key + "': empty list");
    return out;
}

std::vector<std::string> KvConfig::get_str_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    auto out = split_commas(it->second);
    if (out.empty()) raise(ErrorCode::Config, "key '" + key + "': empty list");
    return out;
}

}  // namespace seastereo
