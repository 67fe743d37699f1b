#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace docspan {

struct AlignmentLink {
    std::size_t src_index = 0;
    std::size_t tgt_index = 0;

    auto operator<=>(const AlignmentLink&) const = default;
};

using SentenceLinks = std::vector<AlignmentLink>;

/// One link list per line of `i-j` pairs. Throws Error(malformed_pair) with
/// the line number and offending token.
std::vector<SentenceLinks> parse_pharaoh(std::istream& in);
SentenceLinks parse_pharaoh_line(std::string_view line, std::size_t line_number = 1);

/// Per sentence, links present in both directions, sorted. `reverse` holds
/// target-to-source pairs and is flipped before intersecting unless
/// reverse_is_flipped says it is already in source-target order.
std::vector<SentenceLinks> intersect_alignments(std::span<const SentenceLinks> forward,
                                                std::span<const SentenceLinks> reverse,
                                                bool reverse_is_flipped = false);

/// Whitespace-separated tokens per line; used for tokenized text and lemmas.
using TokenLines = std::vector<std::vector<std::string>>;
TokenLines read_token_lines(std::istream& in);

struct DocumentRange {
    std::string doc_id;
    std::size_t first_line = 0;  // 0-based
    std::size_t line_count = 0;
};

/// `doc_id<TAB>first_line<TAB>line_count` per line, ranges contiguous and
/// ascending.
std::vector<DocumentRange> parse_document_ranges(std::istream& in);

/// Aligned lemma pair at one link.
struct LemmaOccurrence {
    std::size_t sentence = 0;   // index within the document
    std::size_t src_token = 0;
    std::size_t tgt_token = 0;
    std::string tgt_lemma;      // case-folded
};

/// Case-folded source lemma -> every aligned occurrence.
using LemmaMap = std::map<std::string, std::vector<LemmaOccurrence>>;

struct LemmaMapOptions {
    /// Case-folded source lemmas to ignore.
    std::unordered_set<std::string> stoplist;
};

/// Builds the lemma map for one document. links, src_lemmas and tgt_lemmas
/// hold one entry per sentence of the document. Throws
/// Error(sentence_count_mismatch) on count mismatches and
/// Error(index_out_of_range) when a link points past a lemma line.
LemmaMap build_lemma_map(std::span<const SentenceLinks> links, const TokenLines& src_lemmas,
                         const TokenLines& tgt_lemmas, const LemmaMapOptions& options = {});

struct DivergenceRecord {
    std::string doc_id;
    std::string src_lemma;
    std::set<std::string> tgt_lemmas;
    std::vector<LemmaOccurrence> occurrences;
};

struct DocumentLemmaMap {
    std::string doc_id;
    LemmaMap map;
};

/// Source lemmas aligned to at least two distinct target lemmas within a
/// document, sorted by (doc_id, src_lemma).
std::vector<DivergenceRecord> find_divergences(std::span<const DocumentLemmaMap> docs);

std::string divergence_json(const DivergenceRecord& record);

struct SystemComparison {
    std::string doc_id;
    std::string src_lemma;
    std::size_t count_a = 0;
    std::size_t count_b = 0;
};

struct CompareOptions {
    /// Only report entries where one side has at least two target lemmas.
    bool divergent_only = false;
};

/// Every (doc_id, src_lemma) seen by either system whose number of distinct
/// target lemmas differs. A lemma with no aligned occurrence in a system
/// counts 0 there. Both inputs must list the same documents in the same order.
std::vector<SystemComparison> compare_systems(std::span<const DocumentLemmaMap> a,
                                              std::span<const DocumentLemmaMap> b,
                                              const CompareOptions& options = {});

std::string comparison_json(const SystemComparison& entry);

/// One translation system's files for the whole corpus.
struct SystemFiles {
    const TokenLines* target_tokens = nullptr;
    const TokenLines* target_lemmas = nullptr;
    std::span<const SentenceLinks> forward;
    std::span<const SentenceLinks> reverse;
};

/// Intersects alignments and builds a lemma map per document range. Token and
/// lemma lines must agree in count and length; ranges must cover every line.
std::vector<DocumentLemmaMap> build_system_maps(std::span<const DocumentRange> ranges, const TokenLines& source_tokens,
                                                const TokenLines& source_lemmas, const SystemFiles& system,
                                                const LemmaMapOptions& options = {}, bool reverse_is_flipped = false);

/// Tokenized corpora needed to show comparisons in context. Line indices are
/// corpus-global; ranges map documents onto them.
struct ReviewContext {
    std::span<const DocumentRange> ranges;
    const TokenLines* source = nullptr;
    const TokenLines* target_a = nullptr;
    const TokenLines* target_b = nullptr;
    std::span<const DocumentLemmaMap> maps_a;
    std::span<const DocumentLemmaMap> maps_b;
};

/// Plain-text review sheet: for every comparison entry, each sentence in
/// which the lemma is aligned, with the source and both translations and the
/// aligned tokens wrapped in [[ ]].
std::string render_review(std::span<const SystemComparison> entries, const ReviewContext& context);

}  // namespace docspan
