#include "ielts/corpus/csv.hpp"

#include "ielts/common/error.hpp"

namespace ielts::corpus {

std::vector<CsvRow> parse_csv(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    row.line = 1;

    auto end_field = [&] {
        row.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        // A physically empty line yields one empty field; skip it.
        if (!(row.fields.size() == 1 && row.fields.front().empty())) {
            rows.push_back(std::move(row));
        }
        row = CsvRow{};
        row.line = line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field_started || field.empty()) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    field.push_back(c);
                }
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                end_row();
                break;
            default:
                field_started = true;
                field.push_back(c);
        }
    }
    if (in_quotes) {
        throw InvalidInput("unterminated quoted field starting near line " + std::to_string(row.line));
    }
    if (field_started || !field.empty() || !row.fields.empty()) {
        end_row();
    }
    return rows;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace ielts::corpus
