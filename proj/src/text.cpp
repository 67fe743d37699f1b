#include "docspan/text.hpp"

#include <unicode/unistr.h>

namespace docspan::text {

namespace {

constexpr bool is_continuation(char c) noexcept {
    return (static_cast<unsigned char>(c) & 0xC0U) == 0x80U;
}

}  // namespace

std::size_t scalar_count(std::string_view s) noexcept {
    std::size_t n = 0;
    for (char c : s) {
        if (!is_continuation(c)) ++n;
    }
    return n;
}

std::size_t byte_offset_of_scalar(std::string_view s, std::size_t scalar_index) noexcept {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (is_continuation(s[i])) continue;
        if (seen == scalar_index) return i;
        ++seen;
    }
    return s.size();
}

std::vector<std::string_view> split_words(std::string_view s) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) words.push_back(s.substr(start, i - start));
    }
    return words;
}

std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string join_with_separator(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out += ' ';
            out += sep;
            out += ' ';
        }
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split_on_separator(std::string_view line, std::string_view sep) {
    std::vector<std::string> parts;
    if (sep.empty()) {
        parts.emplace_back(line);
        return parts;
    }
    std::size_t pos = 0;
    for (;;) {
        std::size_t hit = line.find(sep, pos);
        std::string_view piece = line.substr(pos, hit == std::string_view::npos ? line.npos : hit - pos);
        if (pos > 0 && !piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
        if (hit != std::string_view::npos && !piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
        parts.emplace_back(piece);
        if (hit == std::string_view::npos) break;
        pos = hit + sep.size();
    }
    return parts;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) noexcept {
    if (needle.empty()) return 0;
    std::size_t n = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

std::string fold_case(std::string_view s) {
    auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    u.foldCase();
    std::string out;
    u.toUTF8String(out);
    return out;
}

}  // namespace docspan::text
