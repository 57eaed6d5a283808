#include "coa/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace coa::toml {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        else if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

double parse_number(const std::string& raw, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(where + ": '" + raw + "' is not a number");
    }
}

Value parse_value(const std::string& raw, const std::string& where) {
    if (raw.empty()) throw ValidationError(where + ": missing value");
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') {
            throw ValidationError(where + ": unterminated string");
        }
        return raw.substr(1, raw.size() - 2);
    }
    if (raw.front() == '[') {
        if (raw.back() != ']') throw ValidationError(where + ": unterminated array");
        std::vector<double> values;
        std::string body = raw.substr(1, raw.size() - 2);
        std::istringstream in(body);
        std::string item;
        while (std::getline(in, item, ',')) {
            const std::string t = trim(item);
            if (t.empty()) continue;
            values.push_back(parse_number(t, where));
        }
        return values;
    }
    if (raw.find('.') != std::string::npos || raw.find('e') != std::string::npos ||
        raw.find('E') != std::string::npos) {
        return parse_number(raw, where);
    }
    try {
        std::size_t used = 0;
        const long long v = std::stoll(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(where + ": '" + raw + "' is not a value");
    }
}

}  // namespace

Table parse(const std::string& text, const std::string& path_for_errors) {
    Table table;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path_for_errors + ":" + std::to_string(line_no);
        const std::string stripped = trim(strip_comment(line));
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']') throw ValidationError(where + ": unterminated section");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) throw ValidationError(where + ": empty section name");
            table.sections[section];
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(where + ": expected 'key = value'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty()) throw ValidationError(where + ": empty key");
        table.sections[section][key] = parse_value(trim(stripped.substr(eq + 1)), where);
    }
    return table;
}

Table parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

bool Table::has(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    return s != sections.end() && s->second.find(key) != s->second.end();
}

namespace {

const Value* lookup(const Table& table, const std::string& section, const std::string& key) {
    const auto s = table.sections.find(section);
    if (s == table.sections.end()) return nullptr;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
}

[[noreturn]] void type_mismatch(const std::string& section, const std::string& key,
                                const char* expected) {
    throw ValidationError("[" + section + "] " + key + ": expected " + expected);
}

}  // namespace

bool Table::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const Value* v = lookup(*this, section, key);
    if (v == nullptr) return fallback;
    if (const bool* b = std::get_if<bool>(v)) return *b;
    type_mismatch(section, key, "a boolean");
}

long long Table::get_int(const std::string& section, const std::string& key,
                         long long fallback) const {
    const Value* v = lookup(*this, section, key);
    if (v == nullptr) return fallback;
    if (const long long* i = std::get_if<long long>(v)) return *i;
    type_mismatch(section, key, "an integer");
}

double Table::get_double(const std::string& section, const std::string& key,
                         double fallback) const {
    const Value* v = lookup(*this, section, key);
    if (v == nullptr) return fallback;
    if (const double* d = std::get_if<double>(v)) return *d;
    if (const long long* i = std::get_if<long long>(v)) return static_cast<double>(*i);
    type_mismatch(section, key, "a number");
}

std::string Table::get_string(const std::string& section, const std::string& key,
                              const std::string& fallback) const {
    const Value* v = lookup(*this, section, key);
    if (v == nullptr) return fallback;
    if (const std::string* s = std::get_if<std::string>(v)) return *s;
    type_mismatch(section, key, "a string");
}

std::vector<double> Table::get_double_array(const std::string& section, const std::string& key,
                                            const std::vector<double>& fallback) const {
    const Value* v = lookup(*this, section, key);
    if (v == nullptr) return fallback;
    if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
    type_mismatch(section, key, "an array of numbers");
}

}  // namespace coa::toml
