#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "coa/error.hpp"

namespace coa::toml {

// Minimal TOML subset: [section] headers, key = value pairs with booleans,
// integers, floats, strings, and flat arrays of numbers. Comments with '#'.
using Value = std::variant<bool, long long, double, std::string, std::vector<double>>;

struct Table {
    // section -> key -> value; keys before the first header live in "".
    std::map<std::string, std::map<std::string, Value>> sections;

    bool has(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    long long get_int(const std::string& section, const std::string& key,
                      long long fallback) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    std::vector<double> get_double_array(const std::string& section, const std::string& key,
                                         const std::vector<double>& fallback) const;
};

Table parse(const std::string& text, const std::string& path_for_errors);
Table parse_file(const std::string& path);

}  // namespace coa::toml
