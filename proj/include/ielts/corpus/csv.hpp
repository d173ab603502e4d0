#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ielts::corpus {

struct CsvRow {
    std::size_t line = 0;  // 1-based physical line the record starts on
    std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// line breaks. A leading UTF-8 byte order mark is skipped. Throws
// InvalidInput on an unterminated quoted field.
std::vector<CsvRow> parse_csv(std::string_view text);

// Quotes a field when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);

}  // namespace ielts::corpus
