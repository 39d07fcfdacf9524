#include "cngcf/csv.hpp"

#include <sstream>

#include "cngcf/error.hpp"
#include "cngcf/util.hpp"

namespace cngcf {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t begin = 0;
    while (true) {
        const std::size_t comma = line.find(',', begin);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(begin));
            break;
        }
        fields.push_back(line.substr(begin, comma - begin));
        begin = comma + 1;
    }
    return fields;
}

}  // namespace

CsvFile read_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    CsvFile out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header) {
            out.header = split_fields(line);
            have_header = true;
            continue;
        }
        out.rows.push_back(CsvRow{line_number, split_fields(line)});
    }
    if (!have_header) throw DataError(path.string() + ": empty CSV file (no header)");
    return out;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(std::vector<std::string> fields) {
    if (fields.size() != header_.size()) {
        throw InvalidInputError("CSV row width " + std::to_string(fields.size()) +
                                " does not match header width " + std::to_string(header_.size()));
    }
    rows_.push_back(std::move(fields));
}

std::string CsvWriter::str() const {
    std::string out;
    auto append_line = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i > 0) out += ',';
            out += fields[i];
        }
        out += '\n';
    };
    append_line(header_);
    for (const auto& row : rows_) append_line(row);
    return out;
}

void CsvWriter::write(const std::filesystem::path& path) const { write_text_file(path, str()); }

}  // namespace cngcf
