#include "ielts/corpus/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <unordered_set>

#include <json.hpp>

#include "ielts/common/data_dir.hpp"
#include "ielts/corpus/csv.hpp"
#include "ielts/text/tokenizer.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::corpus {

namespace {

using nlohmann::json;

enum class Column { id, prompt, essay, band };

std::optional<Column> column_for(const std::string& header) {
    const std::string h = text::fold(header);
    if (h == "id") return Column::id;
    if (h == "prompt" || h == "question") return Column::prompt;
    if (h == "essay" || h == "text" || h == "body") return Column::essay;
    if (h == "band" || h == "overall" || h == "score") return Column::band;
    return std::nullopt;
}

struct RawRow {
    std::optional<std::string> id;
    std::optional<std::string> prompt;
    std::optional<std::string> essay;
    std::optional<std::string> band_text;
    std::optional<double> band_number;
};

double parse_band(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InvalidInput("malformed band value '" + s + "'");
    }
    while (used < s.size() && (s[used] == ' ' || s[used] == '\t')) ++used;
    if (used != s.size()) throw InvalidInput("malformed band value '" + s + "'");
    return v;
}

EssayRecord to_record(const RawRow& raw, std::size_t row) {
    EssayRecord rec;
    rec.id = raw.id.value_or("");
    if (rec.id.empty()) rec.id = "row-" + std::to_string(row);
    rec.prompt = raw.prompt.value_or("");
    if (!raw.essay.has_value()) throw InvalidInput("missing essay column");
    rec.body = *raw.essay;
    if (text::count_words(rec.body) == 0) throw InvalidInput("empty essay");

    std::optional<double> band = raw.band_number;
    if (!band && raw.band_text) {
        std::string t = *raw.band_text;
        t.erase(0, t.find_first_not_of(" \t"));
        if (!t.empty()) band = parse_band(t);
    }
    if (band) {
        if (!std::isfinite(*band) || *band < kMinBand || *band > kMaxBand) {
            throw InvalidInput("band out of range");
        }
        rec.label = round_to_band(*band);
    }
    return rec;
}

template <typename OnRecord, typename OnError>
void scan(const std::filesystem::path& path, DatasetFormat format, OnRecord on_record, OnError on_error) {
    const std::string content = read_file(path);
    std::unordered_set<std::string> seen_ids;

    auto accept = [&](const RawRow& raw, std::size_t row) {
        try {
            EssayRecord rec = to_record(raw, row);
            if (!seen_ids.insert(rec.id).second) throw InvalidInput("duplicate id '" + rec.id + "'");
            on_record(std::move(rec));
        } catch (const InvalidInput& e) {
            on_error(row, e.what());
        }
    };

    if (format == DatasetFormat::csv) {
        std::vector<CsvRow> rows;
        try {
            rows = parse_csv(content);
        } catch (const InvalidInput& e) {
            on_error(0, e.what());
            return;
        }
        if (rows.empty()) {
            on_error(0, "missing header row");
            return;
        }
        std::vector<std::optional<Column>> columns;
        bool has_essay = false;
        for (const auto& h : rows.front().fields) {
            columns.push_back(column_for(h));
            has_essay = has_essay || columns.back() == Column::essay;
        }
        if (!has_essay) {
            on_error(0, "header has no essay column");
            return;
        }
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& fields = rows[r].fields;
            if (fields.size() != columns.size()) {
                on_error(r, "malformed row: expected " + std::to_string(columns.size()) + " fields, got " +
                                std::to_string(fields.size()));
                continue;
            }
            RawRow raw;
            for (std::size_t c = 0; c < fields.size(); ++c) {
                if (!columns[c]) continue;
                switch (*columns[c]) {
                    case Column::id: raw.id = fields[c]; break;
                    case Column::prompt: raw.prompt = fields[c]; break;
                    case Column::essay: raw.essay = fields[c]; break;
                    case Column::band: raw.band_text = fields[c]; break;
                }
            }
            accept(raw, r);
        }
        return;
    }

    std::size_t row = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line(content.data() + pos, eol - pos);
        pos = eol + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        ++row;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception&) {
            on_error(row, "malformed row: invalid JSON");
            continue;
        }
        if (!obj.is_object()) {
            on_error(row, "malformed row: expected a JSON object");
            continue;
        }
        RawRow raw;
        try {
            for (auto it = obj.begin(); it != obj.end(); ++it) {
                const auto col = column_for(it.key());
                if (!col || it->is_null()) continue;
                const json& v = it.value();
                switch (*col) {
                    case Column::id: raw.id = v.is_string() ? v.get<std::string>() : v.dump(); break;
                    case Column::prompt: raw.prompt = v.get<std::string>(); break;
                    case Column::essay: raw.essay = v.get<std::string>(); break;
                    case Column::band:
                        if (v.is_number()) {
                            raw.band_number = v.get<double>();
                        } else {
                            raw.band_text = v.get<std::string>();
                        }
                        break;
                }
            }
        } catch (const json::exception&) {
            on_error(row, "malformed row: wrong value type");
            continue;
        }
        accept(raw, row);
    }
}

}  // namespace

DatasetError::DatasetError(std::size_t row, const std::string& message)
    : InvalidInput("dataset_error", row == 0 ? message : "row " + std::to_string(row) + ": " + message), row_(row) {}

DatasetFormat format_from_path(const std::filesystem::path& path) {
    const std::string ext = text::fold(path.extension().string());
    if (ext == ".csv") return DatasetFormat::csv;
    if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return DatasetFormat::jsonl;
    throw InvalidInput("cannot infer dataset format from '" + path.string() + "' (expected .csv or .jsonl)");
}

std::vector<EssayRecord> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::vector<EssayRecord> records;
    scan(
        path, format, [&](EssayRecord rec) { records.push_back(std::move(rec)); },
        [](std::size_t row, const std::string& message) { throw DatasetError(row, message); });
    return records;
}

std::vector<EssayRecord> load_dataset(const std::filesystem::path& path) {
    return load_dataset(path, format_from_path(path));
}

std::vector<RowError> validate_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::vector<RowError> errors;
    scan(
        path, format, [](EssayRecord) {},
        [&](std::size_t row, const std::string& message) { errors.push_back({row, message}); });
    return errors;
}

void write_dataset_csv(const std::filesystem::path& path, const std::vector<EssayRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "id,prompt,essay,band\n";
    for (const auto& r : records) {
        out << csv_escape(r.id) << ',' << csv_escape(r.prompt) << ',' << csv_escape(r.body) << ',';
        if (r.label) out << r.label->value();
        out << '\n';
    }
}

}  // namespace ielts::corpus
