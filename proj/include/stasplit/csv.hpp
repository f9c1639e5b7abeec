#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stasplit {

// 12 significant digits, the fixed output format of every table.
std::string format_number(double value);

struct CsvTable {
    std::vector<std::string> comments;  // lines starting with '#', without the marker
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const;  // throws ConfigError if absent
};

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

// Throws ConfigError on ragged rows, non-numeric cells or a missing header.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

}  // namespace stasplit
