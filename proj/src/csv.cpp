#include "coa/csv.hpp"

#include <fstream>
#include <sstream>

namespace coa::csv {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& where) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) throw ValidationError(where + ": unterminated quoted field");
    fields.push_back(field);
    return fields;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ValidationError(path + ": missing required column '" + name + "'");
}

Table parse(const std::string& text, const std::string& path_for_errors) {
    Table table;
    table.path = path_for_errors;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path_for_errors + ":" + std::to_string(line_no);
        auto fields = split_line(line, where);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ValidationError(where + ": expected " + std::to_string(table.header.size()) +
                                  " fields, got " + std::to_string(fields.size()));
        }
        table.rows.push_back({line_no, std::move(fields)});
    }
    if (table.header.empty()) {
        throw ValidationError(path_for_errors + ": empty file, header row required");
    }
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

std::string escape_field(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace coa::csv
