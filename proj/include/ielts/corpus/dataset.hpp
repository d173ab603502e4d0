#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ielts/common/error.hpp"
#include "ielts/corpus/essay.hpp"

namespace ielts::corpus {

enum class DatasetFormat { csv, jsonl };

// Format from the file extension (.csv, .jsonl, .json); throws otherwise.
DatasetFormat format_from_path(const std::filesystem::path& path);

struct RowError {
    std::size_t row = 0;  // 1-based data row (the CSV header is not counted)
    std::string message;
};

class DatasetError : public InvalidInput {
public:
    DatasetError(std::size_t row, const std::string& message);

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

// Loads every record or throws DatasetError naming the first bad row.
//
// Columns/keys: `id` (optional, generated as "row-<n>" when missing), `prompt`
// (optional), `essay` (required), `band` (optional). Header matching is case
// insensitive and also accepts the aliases question/text/overall used by
// public IELTS dumps. Labels inside [1, 9] that are off the half-band lattice
// are rounded with round_to_band.
std::vector<EssayRecord> load_dataset(const std::filesystem::path& path, DatasetFormat format);
std::vector<EssayRecord> load_dataset(const std::filesystem::path& path);

// Like load_dataset but collects every row error instead of stopping at the
// first one. Used by `dataset validate`.
std::vector<RowError> validate_dataset(const std::filesystem::path& path, DatasetFormat format);

void write_dataset_csv(const std::filesystem::path& path, const std::vector<EssayRecord>& records);

}  // namespace ielts::corpus
