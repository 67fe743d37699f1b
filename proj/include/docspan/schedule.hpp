#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "docspan/corpus.hpp"
#include "docspan/translate.hpp"

namespace docspan {

/// Character limits for overlapping windows. Lengths use the corpus
/// convention: scalars plus one per join between sentences.
struct WindowLimits {
    std::size_t pre_max = 200;
    std::size_t main_max = 500;
    std::size_t total_max = 900;

    void validate() const;
};

struct SentenceSpan {
    std::size_t start = 0;
    std::size_t len = 0;

    std::size_t end() const noexcept { return start + len; }
    bool empty() const noexcept { return len == 0; }
    friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

/// Half-open range of scalar offsets into the document text (sentences joined
/// by single spaces).
struct CharRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    friend bool operator==(const CharRange&, const CharRange&) = default;
};

/// One decoding window: ignored pre-context, kept main content, ignored
/// post-context.
///
/// The pre-context is the longest suffix of the preceding document text that
/// starts at a word boundary and fits pre_max. It is encoded as separate
/// pieces: an optional partial leading fragment, then every whole sentence it
/// covers. Each piece occupies one separator-delimited slot in the encoded
/// window, so the main content of a decoded window starts at slot
/// pre_pieces.size().
struct WindowPlan {
    std::string doc_id;
    std::size_t index = 0;

    std::vector<std::string> pre_pieces;
    std::string pre_text;
    std::size_t pre_chars = 0;
    CharRange pre_range;
    std::size_t pre_first_sentence = 0;  // sentence holding the first piece
    bool pre_fragment = false;           // first piece is a partial sentence

    SentenceSpan main;
    std::size_t main_chars = 0;
    bool oversized = false;  // a single sentence longer than main_max

    SentenceSpan post;
    std::size_t post_chars = 0;

    std::size_t expected_parts() const noexcept { return pre_pieces.size() + main.len + post.len; }
};

std::vector<WindowPlan> plan_windows(const Document& doc, const WindowLimits& limits);

/// Greedy left-to-right whole-sentence spans of at most `limit` characters.
/// A sentence longer than the limit forms its own span.
std::vector<SentenceSpan> plan_nonoverlapping(const Document& doc, std::size_t limit);

/// Windows without pre- or post-context covering the given spans.
std::vector<WindowPlan> plans_from_spans(const Document& doc, std::span<const SentenceSpan> spans,
                                         std::size_t limit);

/// Encoded decoder input: pre pieces, main and post sentences joined with the
/// separator.
std::string encode_window(const WindowPlan& plan, const Document& doc, const SeparatorToken& sep);

/// One JSON object (no trailing newline) describing a plan.
std::string plan_dump_line(const WindowPlan& plan);

struct StitchedTranslation {
    std::string doc_id;
    std::vector<std::string> sentences;
    std::vector<std::size_t> backup_indices;  // ascending
};

/// Joins the main-content translations of consecutive windows. A window whose
/// decoded output is blank, failed, or does not split into exactly
/// expected_parts() pieces contributes empty placeholders and all of its main
/// sentences are listed in backup_indices.
StitchedTranslation stitch(std::span<const WindowPlan> plans, std::span<const TranslationResponse> translations,
                           const SeparatorToken& sep);

enum class DecodeMode { windows, nonoverlap };

struct ScheduleConfig {
    DecodeMode mode = DecodeMode::windows;
    WindowLimits limits;
    std::size_t nonoverlap_limit = 700;

    void validate() const;
};

std::vector<WindowPlan> plan_document(const Document& doc, const ScheduleConfig& config);

struct DocumentRun {
    StitchedTranslation translation;
    std::vector<WindowPlan> plans;
};

/// Plans every document, translates all windows as one batch, stitches, then
/// translates each backup sentence alone and splices it in. Request ids come
/// from `ids`, windows first (document order), then backups.
std::vector<DocumentRun> run_documents(std::span<const Document> docs, const ScheduleConfig& config,
                                       Translator& translator, const SeparatorToken& sep, RequestIds& ids);

DocumentRun run_document(const Document& doc, const ScheduleConfig& config, Translator& translator,
                         const SeparatorToken& sep, RequestIds& ids);

}  // namespace docspan
