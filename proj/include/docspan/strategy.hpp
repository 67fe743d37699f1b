#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docspan/corpus.hpp"
#include "docspan/schedule.hpp"
#include "docspan/translate.hpp"

namespace docspan {

/// Sentence translated as the position-th of a context_size-sentence context
/// ("2nd/3" = position 2, context 3).
struct PositionLabel {
    std::size_t position = 1;
    std::size_t context_size = 1;

    /// Throws Error(config_invalid) unless 1 <= position <= context_size <= 3.
    static PositionLabel make(std::size_t position, std::size_t context_size);
    /// Parses "2/3".
    static PositionLabel parse(std::string_view s);

    std::string str() const;  // "2/3"
    std::string ordinal() const;  // "2nd/3"

    auto operator<=>(const PositionLabel&) const = default;
};

/// Every label, in enumeration order 1/3, 2/3, 3/3, 1/2, 2/2, 1/1.
const std::array<PositionLabel, 6>& all_labels();

/// Default preference order; 3/3 is deliberately absent.
std::vector<PositionLabel> default_cascade();

/// Parses "2/3,1/3,2/2,1/2,1/1".
std::vector<PositionLabel> parse_cascade(std::string_view s);
std::string format_cascade(std::span<const PositionLabel> cascade);

struct ContextCandidate {
    PositionLabel label;
    SentenceSpan span;
};

/// All labels whose context window fits inside a document of doc_size
/// sentences for the sentence at sentence_index (3/3 included).
std::vector<ContextCandidate> build_candidates(std::size_t doc_size, std::size_t sentence_index);

inline std::vector<ContextCandidate> build_candidates(const Document& doc, std::size_t sentence_index) {
    return build_candidates(doc.sentences.size(), sentence_index);
}

struct ValidityRules {
    std::size_t max_word_repeats = 20;
    std::size_t max_word_len = 49;
    void validate() const;
};

enum class Verdict { valid, sentence_count, word_repeat, word_length, backend_failure };

std::string_view to_string(Verdict v) noexcept;

/// Checks, in order: split on the separator yields expected_sentences parts;
/// no whitespace token (other than the separator) occurs more than
/// max_word_repeats times; no token is longer than max_word_len scalars.
/// Returns the first failed check.
Verdict check_validity(std::string_view decoded, std::size_t expected_sentences, const ValidityRules& rules,
                       const SeparatorToken& sep);

struct CandidateTranslation {
    std::size_t sentence_index = 0;
    PositionLabel label;
    SentenceSpan span;
    std::string decoded;
    std::optional<std::string> extracted;  // present iff verdict == valid
    Verdict verdict = Verdict::valid;
};

/// Validates a decoded context and extracts the sentence at label.position.
CandidateTranslation evaluate_candidate(std::size_t sentence_index, const ContextCandidate& candidate,
                                        const TranslationResponse& response, const ValidityRules& rules,
                                        const SeparatorToken& sep);

struct Selection {
    std::string sentence;
    PositionLabel label;
};

/// First cascade entry that has a valid candidate. Throws
/// Error(no_valid_candidate) when none does.
Selection select_final(std::span<const CandidateTranslation> candidates, std::span<const PositionLabel> cascade);

struct LabelStats {
    std::size_t chosen = 0;
    std::size_t validated = 0;
    std::map<Verdict, std::size_t> invalid;
};

struct PositionalStats {
    std::map<PositionLabel, LabelStats> per_label;
    std::size_t sentences = 0;
    std::size_t requests = 0;       // unique context translations sent
    std::size_t no_valid = 0;

    std::string table() const;
    /// One JSON object per label.
    std::vector<std::string> jsonl() const;
    void merge(const PositionalStats& other);
};

struct PositionalFailure {
    std::string doc_id;
    std::size_t sentence_index;
};

struct PositionalResult {
    Document translated;
    std::vector<std::optional<PositionLabel>> chosen;  // nullopt where no candidate was valid
    std::vector<CandidateTranslation> candidates;
    PositionalStats stats;
    std::vector<PositionalFailure> failures;
};

/// Backend per label; labels without an override use `fallback`.
struct PositionalBackends {
    Translator* fallback = nullptr;
    std::map<PositionLabel, Translator*> overrides;

    Translator& for_label(const PositionLabel& label) const;
};

struct PositionalConfig {
    ValidityRules rules;
    std::vector<PositionLabel> cascade = default_cascade();
};

/// Translates every context span needed by the cascade once per backend,
/// validates each candidate and selects per sentence. Sentences with no valid
/// candidate keep the raw 1/1 output (empty if that failed) and are listed in
/// failures.
PositionalResult run_document_positional(const Document& doc, const PositionalBackends& backends,
                                         const PositionalConfig& config, const SeparatorToken& sep,
                                         RequestIds& ids);

}  // namespace docspan
