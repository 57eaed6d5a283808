#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "coa/error.hpp"

namespace coa::csv {

struct Row {
    std::size_t line = 0;  // 1-based line number in the source file
    std::vector<std::string> fields;
};

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<Row> rows;

    // Index of a header column; throws ValidationError naming the file.
    std::size_t column(const std::string& name) const;
};

/// Reads a header-first CSV file. Handles double-quoted fields with ""
/// escapes. Ragged rows raise ValidationError with "<path>:<line>: ...".
Table read_file(const std::string& path);

Table parse(const std::string& text, const std::string& path_for_errors);

std::string escape_field(const std::string& field);

}  // namespace coa::csv
