#include "docspan/postprocess.hpp"

#include <vector>

#include "docspan/error.hpp"
#include "docspan/text.hpp"

namespace docspan {

void RepetitionRule::validate() const {
    if (min_phrase_words < 1 || min_phrase_words > max_phrase_words) {
        throw Error(ErrorCode::config_invalid, "repetition phrase lengths must satisfy 1 <= min <= max");
    }
    if (max_allowed_runs < 1) throw Error(ErrorCode::config_invalid, "allowed runs must be at least 1");
    if (keep < 1 || keep > max_allowed_runs) {
        throw Error(ErrorCode::config_invalid, "kept copies must be between 1 and the allowed run count");
    }
}

namespace {

struct Token {
    std::string_view lead;  // whitespace before the word
    std::string_view word;
};

std::vector<Token> tokenize(std::string_view s, std::string_view& tail) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t ws = i;
        while (i < s.size() && text::is_space(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !text::is_space(s[i])) ++i;
        if (i == start) {
            tail = s.substr(ws);
            return tokens;
        }
        tokens.push_back({s.substr(ws, start - ws), s.substr(start, i - start)});
    }
    tail = {};
    return tokens;
}

bool same_phrase(const std::vector<Token>& t, std::size_t a, std::size_t b, std::size_t len) {
    for (std::size_t k = 0; k < len; ++k) {
        if (t[a + k].word != t[b + k].word) return false;
    }
    return true;
}

/// One left-to-right pass. Returns true if anything was collapsed.
bool collapse_pass(std::string_view in, const RepetitionRule& rule, std::string& out) {
    std::string_view tail;
    auto tokens = tokenize(in, tail);
    out.clear();
    bool changed = false;
    std::size_t i = 0;
    while (i < tokens.size()) {
        bool collapsed = false;
        for (std::size_t len = rule.max_phrase_words; len >= rule.min_phrase_words; --len) {
            if (i + len > tokens.size()) continue;
            std::size_t runs = 1;
            while (i + (runs + 1) * len <= tokens.size() && same_phrase(tokens, i, i + runs * len, len)) ++runs;
            if (runs <= rule.max_allowed_runs) continue;

            out += tokens[i].lead;
            for (std::size_t copy = 0; copy < rule.keep; ++copy) {
                for (std::size_t k = 0; k < len; ++k) {
                    if (copy > 0 || k > 0) out += ' ';
                    out += tokens[i + k].word;
                }
            }
            i += runs * len;
            collapsed = true;
            changed = true;
            break;
        }
        if (!collapsed) {
            out += tokens[i].lead;
            out += tokens[i].word;
            ++i;
        }
    }
    out += tail;
    return changed;
}

}  // namespace

std::string remove_repetitions(std::string_view text, const RepetitionRule& rule) {
    rule.validate();
    std::string current(text);
    std::string next;
    // Every collapse removes tokens, so this terminates.
    while (collapse_pass(current, rule, next)) current.swap(next);
    return current;
}

std::string convert_quotes(std::string_view text, std::string_view separator, QuoteStats* stats) {
    static constexpr std::string_view lower = "\xE2\x80\x9E";  // „
    static constexpr std::string_view upper = "\xE2\x80\x9C";  // “
    std::string out;
    out.reserve(text.size() + 8);
    std::size_t in_segment = 0;

    auto close_segment = [&] {
        if (stats && in_segment % 2 == 1) ++stats->unbalanced_segments;
        in_segment = 0;
    };

    std::size_t i = 0;
    while (i < text.size()) {
        if (!separator.empty() && text.compare(i, separator.size(), separator) == 0) {
            close_segment();
            out += separator;
            i += separator.size();
            continue;
        }
        if (text[i] == '"') {
            out += in_segment % 2 == 0 ? lower : upper;
            ++in_segment;
            if (stats) ++stats->converted;
        } else {
            out += text[i];
        }
        ++i;
    }
    close_segment();
    return out;
}

}  // namespace docspan
