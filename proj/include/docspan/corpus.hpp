#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace docspan {

/// Token inserted between sentences of an encoded sequence. Non-empty and
/// free of whitespace; it must never occur inside corpus text.
class SeparatorToken {
public:
    /// Throws Error(config_invalid) when the token is empty or contains
    /// whitespace.
    explicit SeparatorToken(std::string token);

    const std::string& str() const noexcept { return token_; }
    bool occurs_in(std::string_view text) const noexcept;

    friend bool operator==(const SeparatorToken&, const SeparatorToken&) = default;

private:
    std::string token_;
};

inline constexpr std::string_view default_separator = "<SEP>";

/// One line of text. char_len caches the Unicode scalar count.
class Sentence {
public:
    Sentence() = default;
    explicit Sentence(std::string text);

    const std::string& text() const noexcept { return text_; }
    std::size_t char_len() const noexcept { return char_len_; }

    friend bool operator==(const Sentence& a, const Sentence& b) { return a.text_ == b.text_; }

private:
    std::string text_;
    std::size_t char_len_ = 0;
};

struct Document {
    std::string doc_id;
    std::vector<Sentence> sentences;

    friend bool operator==(const Document&, const Document&) = default;
};

struct ParallelDocument {
    std::string doc_id;
    std::vector<Sentence> source;
    std::vector<Sentence> target;

    std::size_t size() const noexcept { return source.size(); }
};

enum class CorpusFormat { blank_line, docid_tsv };

struct ParseWarning {
    std::size_t line_number;  // 1-based
    std::string message;
};

struct ParsedCorpus {
    std::vector<Document> documents;
    std::vector<ParseWarning> warnings;
};

/// Reads a document-delimited corpus.
///
/// Blank-line format: one sentence per line, documents separated by a blank
/// line. Each additional consecutive blank line would open an empty document;
/// those are skipped and reported as warnings. Documents get positional ids
/// "d1", "d2", ...
///
/// docid-TSV format: `doc_id<TAB>sentence` per line, rows of one document
/// contiguous.
///
/// Trailing carriage returns are stripped. When `separator` is given, a
/// sentence containing it raises SeparatorCollision.
ParsedCorpus parse_document_corpus(std::istream& in, CorpusFormat format,
                                   const SeparatorToken* separator = nullptr);

void write_document_corpus(std::ostream& out, std::span<const Document> docs, CorpusFormat format);

/// Pairs source and target documents positionally. Doc ids must agree and
/// every pair must have equal sentence counts.
std::vector<ParallelDocument> pair_documents(std::span<const Document> src, std::span<const Document> tgt);

/// Scalars of all sentences plus one per inter-sentence join. Separator
/// tokens are not part of the measure. Empty span measures 0.
std::size_t span_char_length(std::span<const Sentence> sentences) noexcept;

/// Throws SeparatorCollision if any sentence of the documents contains sep.
void check_separator(std::span<const Document> docs, const SeparatorToken& sep);

std::vector<std::string> sentence_texts(std::span<const Sentence> sentences);

}  // namespace docspan
