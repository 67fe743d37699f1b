#include "docspan/corpus.hpp"

#include <istream>
#include <ostream>
#include <unordered_set>

#include "docspan/error.hpp"
#include "docspan/text.hpp"

namespace docspan {

SeparatorToken::SeparatorToken(std::string token) : token_(std::move(token)) {
    if (token_.empty()) throw Error(ErrorCode::config_invalid, "separator token must be non-empty");
    for (char c : token_) {
        if (text::is_space(c)) {
            throw Error(ErrorCode::config_invalid, "separator token must not contain whitespace");
        }
    }
}

bool SeparatorToken::occurs_in(std::string_view text) const noexcept {
    return text.find(token_) != std::string_view::npos;
}

Sentence::Sentence(std::string text) : text_(std::move(text)), char_len_(text::scalar_count(text_)) {}

namespace {

void strip_cr(std::string& line) {
    while (!line.empty() && line.back() == '\r') line.pop_back();
}

void check_collision(const std::string& sentence, const SeparatorToken* sep, std::size_t line_number) {
    if (sep && sep->occurs_in(sentence)) {
        throw Error(ErrorCode::separator_collision,
                    "line " + std::to_string(line_number) + ": sentence contains separator token '" +
                        sep->str() + "'");
    }
}

ParsedCorpus parse_blank_line(std::istream& in, const SeparatorToken* sep) {
    ParsedCorpus result;
    Document current;
    std::size_t blank_run = 0;
    std::size_t line_number = 0;
    std::string line;

    auto flush = [&] {
        if (current.sentences.empty()) return;
        current.doc_id = "d" + std::to_string(result.documents.size() + 1);
        result.documents.push_back(std::move(current));
        current = Document{};
    };

    while (std::getline(in, line)) {
        ++line_number;
        strip_cr(line);
        if (line.empty()) {
            // The first blank line closes a document; every further one would
            // delimit an empty document.
            if (blank_run > 0 || (result.documents.empty() && current.sentences.empty())) {
                result.warnings.push_back({line_number, "empty document skipped"});
            }
            flush();
            ++blank_run;
            continue;
        }
        blank_run = 0;
        check_collision(line, sep, line_number);
        current.sentences.emplace_back(std::move(line));
    }
    flush();
    return result;
}

ParsedCorpus parse_tsv(std::istream& in, const SeparatorToken* sep) {
    ParsedCorpus result;
    std::unordered_set<std::string> seen;
    std::size_t line_number = 0;
    std::string line;

    while (std::getline(in, line)) {
        ++line_number;
        strip_cr(line);
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw Error(ErrorCode::malformed_line,
                        "line " + std::to_string(line_number) + ": expected doc_id<TAB>sentence");
        }
        std::string doc_id = line.substr(0, tab);
        std::string sentence = line.substr(tab + 1);
        check_collision(sentence, sep, line_number);

        if (result.documents.empty() || result.documents.back().doc_id != doc_id) {
            if (!seen.insert(doc_id).second) {
                throw Error(ErrorCode::duplicate_doc_id, "line " + std::to_string(line_number) +
                                                             ": document '" + doc_id + "' is not contiguous");
            }
            result.documents.push_back(Document{doc_id, {}});
        }
        result.documents.back().sentences.emplace_back(std::move(sentence));
    }
    return result;
}

}  // namespace

ParsedCorpus parse_document_corpus(std::istream& in, CorpusFormat format, const SeparatorToken* separator) {
    return format == CorpusFormat::blank_line ? parse_blank_line(in, separator) : parse_tsv(in, separator);
}

void write_document_corpus(std::ostream& out, std::span<const Document> docs, CorpusFormat format) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (format == CorpusFormat::blank_line) {
            if (d > 0) out << '\n';
            for (const auto& s : docs[d].sentences) out << s.text() << '\n';
        } else {
            for (const auto& s : docs[d].sentences) out << docs[d].doc_id << '\t' << s.text() << '\n';
        }
    }
}

std::vector<ParallelDocument> pair_documents(std::span<const Document> src, std::span<const Document> tgt) {
    if (src.size() != tgt.size()) {
        throw Error(ErrorCode::length_mismatch, "source corpus has " + std::to_string(src.size()) +
                                                    " documents, target has " + std::to_string(tgt.size()));
    }
    std::vector<ParallelDocument> out;
    out.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].doc_id != tgt[i].doc_id) {
            throw Error(ErrorCode::doc_id_mismatch,
                        "document " + std::to_string(i + 1) + ": source id '" + src[i].doc_id +
                            "' does not match target id '" + tgt[i].doc_id + "'");
        }
        if (src[i].sentences.size() != tgt[i].sentences.size()) {
            throw Error(ErrorCode::sentence_count_mismatch,
                        "document '" + src[i].doc_id + "': " + std::to_string(src[i].sentences.size()) +
                            " source vs " + std::to_string(tgt[i].sentences.size()) + " target sentences");
        }
        out.push_back(ParallelDocument{src[i].doc_id, src[i].sentences, tgt[i].sentences});
    }
    return out;
}

std::size_t span_char_length(std::span<const Sentence> sentences) noexcept {
    if (sentences.empty()) return 0;
    std::size_t total = sentences.size() - 1;
    for (const auto& s : sentences) total += s.char_len();
    return total;
}

void check_separator(std::span<const Document> docs, const SeparatorToken& sep) {
    for (const auto& doc : docs) {
        for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
            if (sep.occurs_in(doc.sentences[i].text())) {
                throw Error(ErrorCode::separator_collision, "document '" + doc.doc_id + "' sentence " +
                                                                std::to_string(i + 1) + " contains separator '" +
                                                                sep.str() + "'");
            }
        }
    }
}

std::vector<std::string> sentence_texts(std::span<const Sentence> sentences) {
    std::vector<std::string> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(s.text());
    return out;
}

}  // namespace docspan
