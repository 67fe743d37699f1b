#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace docspan {

struct RepetitionRule {
    std::size_t min_phrase_words = 1;
    std::size_t max_phrase_words = 4;
    /// Runs longer than this are collapsed.
    std::size_t max_allowed_runs = 2;
    /// Copies left after collapsing a run.
    std::size_t keep = 1;

    void validate() const;
};

/// Collapses immediately repeated phrases. At each token, phrase lengths are
/// tried longest first; a phrase repeated more than max_allowed_runs times in
/// a row is replaced by `keep` copies joined by single spaces. Passes repeat
/// until nothing changes, so the result is a fixpoint. Whitespace outside
/// collapsed regions is preserved.
std::string remove_repetitions(std::string_view text, const RepetitionRule& rule = {});

struct QuoteStats {
    std::size_t converted = 0;
    std::size_t unbalanced_segments = 0;
};

/// Converts straight double quotes to Czech quotes, alternating „ (U+201E)
/// and “ (U+201C). Alternation restarts in every separator-delimited segment
/// (the whole line when separator is empty). A segment with an odd number of
/// quotes is counted in stats.unbalanced_segments.
std::string convert_quotes(std::string_view text, std::string_view separator = {}, QuoteStats* stats = nullptr);

}  // namespace docspan
