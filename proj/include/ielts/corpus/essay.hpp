#pragma once

#include <optional>
#include <string>

#include "ielts/corpus/band.hpp"

namespace ielts::corpus {

struct EssayRecord {
    std::string id;
    std::string prompt;
    std::string body;
    std::optional<Band> label;
};

}  // namespace ielts::corpus
