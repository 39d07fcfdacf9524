#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace cngcf {

struct CsvRow {
    std::size_t line_number{0};  // 1-based line in the source file
    std::vector<std::string> fields;
};

struct CsvFile {
    std::vector<std::string> header;
    std::vector<CsvRow> rows;
};

// Plain comma-separated values, no quoting. Blank lines are skipped, a
// trailing '\r' is stripped. First non-blank line is the header.
CsvFile read_csv(const std::filesystem::path& path);

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(std::vector<std::string> fields);
    std::string str() const;
    void write(const std::filesystem::path& path) const;
    std::size_t row_count() const { return rows_.size(); }

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace cngcf
