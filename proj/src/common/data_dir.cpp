#include "ielts/common/data_dir.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ielts/common/error.hpp"

#ifndef IELTS_DEFAULT_DATA_DIR
#define IELTS_DEFAULT_DATA_DIR "data"
#endif

namespace ielts {

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("IELTS_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return IELTS_DEFAULT_DATA_DIR;
}

std::filesystem::path data_file(const std::string& relative) {
    return data_dir() / relative;
}

std::vector<std::string> read_lines(const std::filesystem::path& path, bool skip_comments) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (skip_comments && line.front() == '#') continue;
        lines.push_back(std::move(line));
    }
    return lines;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace ielts
