#pragma once

#include <set>
#include <string>
#include <vector>

#include "mtforge/lang.hpp"

namespace mtforge::text {

// Reserved case markers. Tokenization of ordinary text can never produce
// them because '_' is detached like punctuation.
inline constexpr const char* kTitleMarker = "_U_";
inline constexpr const char* kUpperMarker = "_UU_";

bool is_case_marker(const std::string& token);

// Punctuation normalization. The mapping is a fixed table (see
// data/punct_norm.tsv for the shipped copy): fullwidth forms to ASCII,
// curly quotes to straight, dash variants to '-', ellipsis variants to
// "...", exotic spaces to ' '. Runs of spaces collapse and ends are
// trimmed. Idempotent by construction: every replacement is plain ASCII.
RawSentence normalize_punct(const RawSentence& s);

// The table as (codepoint, replacement) pairs, for export and for checking
// the shipped data file against the compiled-in copy.
std::vector<std::pair<char32_t, std::string>> punct_table();

// Whitespace split, then leading/trailing punctuation detached one
// character at a time. Interior characters are never touched, so decimal
// numbers ("3.5") and hyphenated words survive intact.
TokenSentence tokenize_en(const RawSentence& s);

// Greedy longest-match segmentation over the lexicon; characters covered
// by no lexicon word become single-character tokens. Token concatenation
// equals the input with whitespace removed.
TokenSentence segment_zh(const RawSentence& s, const std::set<std::string>& lexicon);

// Case marking:
//   all ASCII letters uppercase, at least two of them  -> _UU_ + lowercased
//   first letter uppercase, no other uppercase letter  -> _U_  + lowercased
//   anything else (mixed case, no letters)             -> unchanged
// Throws input_contains_marker if a reserved marker is already present.
TokenSentence mark_case(const TokenSentence& t);

// Exact inverse of mark_case. Throws dangling_marker when a marker is
// sentence-final or immediately followed by another marker.
TokenSentence unmark_case(const TokenSentence& t);

// Joins tokens with spaces, then applies the attachment table: no space
// before .,;:?!%)]}' and closing quotes, none after ([{ and opening
// quotes. Straight quotes alternate open/close per character.
RawSentence detokenize_en(const TokenSentence& t);

std::set<std::string> load_lexicon(const std::string& path);

}  // namespace mtforge::text
