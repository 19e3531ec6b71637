#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace nhkl::cfg {

/// Flat key/value store with dotted paths ("solver.dt_init = 0.001").
/// The text form is one assignment per line, `#` comments, blank lines
/// ignored; keys are sorted on serialization and doubles are written with
/// enough digits to round-trip, so parse(serialize(c)) == c exactly.
class Config {
public:
    Config() = default;

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, const char* value);
    void set(const std::string& key, double value);
    void set(const std::string& key, long value);
    void set(const std::string& key, int value);
    void set(const std::string& key, bool value);

    bool has(const std::string& key) const;
    void erase(const std::string& key);

    /// Accessors throw std::invalid_argument when the key is missing or
    /// the value does not parse as the requested type; the *_or forms
    /// fall back instead of throwing on a missing key (but still reject
    /// malformed values).
    const std::string& get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key,
                              const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int_or(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool_or(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const {
        return entries_;
    }
    bool operator==(const Config&) const = default;

    std::string serialize() const;
    static Config parse(const std::string& text);

    void save(const std::string& path) const;
    static Config load(const std::string& path);

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace nhkl::cfg
