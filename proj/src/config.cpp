#include "nhkl/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "nhkl/util.hpp"

namespace nhkl::cfg {

namespace {

bool valid_key(const std::string& key) {
    if (key.empty() || key.front() == '.' || key.back() == '.') return false;
    for (char c : key) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
              c == '-' || c == '.'))
            return false;
    }
    return true;
}

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
    require(valid_key(key), "config key '" + key + "' is malformed");
    require(value.find('\n') == std::string::npos,
            "config value for '" + key + "' contains a newline");
    entries_[key] = trim(value);
}

void Config::set(const std::string& key, const char* value) {
    set(key, std::string(value));
}

void Config::set(const std::string& key, double value) {
    set(key, format_double(value));
}

void Config::set(const std::string& key, long value) {
    set(key, std::to_string(value));
}

void Config::set(const std::string& key, int value) {
    set(key, std::to_string(value));
}

void Config::set(const std::string& key, bool value) {
    set(key, std::string(value ? "true" : "false"));
}

bool Config::has(const std::string& key) const {
    return entries_.count(key) != 0;
}

void Config::erase(const std::string& key) { entries_.erase(key); }

const std::string& Config::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    require(it != entries_.end(), "config key '" + key + "' is missing");
    return it->second;
}

std::string Config::get_string_or(const std::string& key,
                                  const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string& raw = get_string(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    require(ec == std::errc() && p == raw.data() + raw.size(),
            "config key '" + key + "' holds '" + raw + "', not a number");
    return v;
}

double Config::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long Config::get_int(const std::string& key) const {
    const std::string& raw = get_string(key);
    long v = 0;
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    require(ec == std::errc() && p == raw.data() + raw.size(),
            "config key '" + key + "' holds '" + raw + "', not an integer");
    return v;
}

long Config::get_int_or(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
    const std::string& raw = get_string(key);
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    throw std::invalid_argument("config key '" + key + "' holds '" + raw +
                                "', not a boolean");
}

bool Config::get_bool_or(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto eq = body.find('=');
        require(eq != std::string::npos,
                "config line " + std::to_string(lineno) +
                    " has no '=': " + body);
        std::string key = trim(body.substr(0, eq));
        require(valid_key(key), "config line " + std::to_string(lineno) +
                                    " has malformed key '" + key + "'");
        require(!c.has(key), "config key '" + key + "' appears twice");
        c.entries_[key] = trim(body.substr(eq + 1));
    }
    return c;
}

void Config::save(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), "cannot open '" + path + "' for writing");
    out << serialize();
    require(out.good(), "write to '" + path + "' failed");
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

}  // namespace nhkl::cfg
