#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mtforge::utf8 {

// Decodes the code point starting at byte offset i and advances i past it.
// Malformed bytes decode as U+FFFD and advance by one byte.
char32_t decode(std::string_view s, size_t& i);

void append(std::string& out, char32_t cp);

std::vector<char32_t> decode_all(std::string_view s);
std::string encode_all(const std::vector<char32_t>& cps);

size_t count(std::string_view s);  // code points, not bytes

bool is_space(char32_t cp);
bool is_ascii_letter(char32_t cp);
bool is_ascii_upper(char32_t cp);
bool is_ascii_lower(char32_t cp);

// CJK ideographs: Unified blocks + Ext A/B + compatibility block.
bool is_han(char32_t cp);

// Punctuation for character-class statistics: ASCII punctuation plus the
// General Punctuation, CJK Symbols and Fullwidth Forms blocks.
bool is_punct(char32_t cp);

}  // namespace mtforge::utf8
