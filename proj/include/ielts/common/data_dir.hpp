#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ielts {

// Resolves the data directory: IELTS_DATA_DIR from the environment when set,
// otherwise the directory baked in at configure time.
std::filesystem::path data_dir();

std::filesystem::path data_file(const std::string& relative);

std::vector<std::string> read_lines(const std::filesystem::path& path, bool skip_comments = true);

std::string read_file(const std::filesystem::path& path);

}  // namespace ielts
