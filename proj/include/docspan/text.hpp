#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Small UTF-8 and tokenization helpers shared by every module.
namespace docspan::text {

/// Number of Unicode scalar values in a UTF-8 string (continuation bytes are
/// not counted).
std::size_t scalar_count(std::string_view s) noexcept;

/// Byte offset of the scalar with the given index; returns s.size() when the
/// index is at or past the end.
std::size_t byte_offset_of_scalar(std::string_view s, std::size_t scalar_index) noexcept;

/// ASCII whitespace (space, tab, CR, LF, VT, FF).
constexpr bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

/// Maximal runs of non-whitespace characters.
std::vector<std::string_view> split_words(std::string_view s);

std::string_view trim(std::string_view s) noexcept;

/// Joins sentences with " <sep> ".
std::string join_with_separator(const std::vector<std::string>& parts, std::string_view sep);

/// Inverse of join_with_separator: splits on every occurrence of sep and
/// removes the single space that join placed on each side of it, if present.
std::vector<std::string> split_on_separator(std::string_view line, std::string_view sep);

/// Number of non-overlapping occurrences of needle in haystack.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle) noexcept;

/// Full Unicode case folding (UTF-8 in, UTF-8 out).
std::string fold_case(std::string_view s);

}  // namespace docspan::text
