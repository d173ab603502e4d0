#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace ielts::text {

struct CodePoint {
    char32_t value = 0;
    std::size_t length = 1;  // bytes consumed; invalid sequences consume one byte
};

CodePoint decode_utf8(std::string_view s, std::size_t pos);

void append_utf8(std::string& out, char32_t cp);

bool is_letter(char32_t cp);
bool is_upper(char32_t cp);
bool is_apostrophe(char32_t cp);
bool is_space(char32_t cp);

// Lowercases ASCII and Latin-1 letters and maps the typographic apostrophe
// to ASCII. Word tokens are compared in this form everywhere.
std::string fold(std::string_view s);

}  // namespace ielts::text
