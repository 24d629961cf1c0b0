// Minimal CSV reading and writing (RFC-style quoting).
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clv {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
    int require_column(const std::string& name) const;  // throws InputError
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

std::string csv_escape(const std::string& field);

}  // namespace clv
