#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "docspan/corpus.hpp"
#include "docspan/error.hpp"
#include "docspan/text.hpp"
#include "test_support.hpp"

using namespace docspan;

namespace {

ParsedCorpus parse(const std::string& s, CorpusFormat f = CorpusFormat::blank_line,
                   const SeparatorToken* sep = nullptr) {
    std::istringstream in(s);
    return parse_document_corpus(in, f, sep);
}

std::vector<Sentence> sentences(const std::vector<std::string>& texts) {
    std::vector<Sentence> out;
    for (const auto& t : texts) out.emplace_back(t);
    return out;
}

}  // namespace

TEST(Text, ScalarCountIgnoresContinuationBytes) {
    EXPECT_EQ(text::scalar_count(""), 0u);
    EXPECT_EQ(text::scalar_count("abc"), 3u);
    EXPECT_EQ(text::scalar_count("čeština"), 7u);
    EXPECT_EQ(text::scalar_count("„“"), 2u);
    EXPECT_EQ(text::scalar_count("😀a"), 2u);
}

TEST(Text, ByteOffsetOfScalar) {
    std::string s = "žluť x";
    EXPECT_EQ(text::byte_offset_of_scalar(s, 0), 0u);
    EXPECT_EQ(text::byte_offset_of_scalar(s, 1), 2u);
    EXPECT_EQ(text::byte_offset_of_scalar(s, 4), 6u);
    EXPECT_EQ(text::byte_offset_of_scalar(s, 99), s.size());
}

TEST(Text, SplitJoinInverse) {
    std::vector<std::string> parts{"a b", "", " lead", "trail ", "x"};
    auto line = text::join_with_separator(parts, "<SEP>");
    EXPECT_EQ(text::split_on_separator(line, "<SEP>"), parts);
    EXPECT_EQ(text::split_on_separator("a<SEP>b", "<SEP>"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(text::split_on_separator("", "<SEP>"), (std::vector<std::string>{""}));
}

TEST(Text, SplitWordsAndCount) {
    auto w = text::split_words("  a\tbb  c ");
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w[1], "bb");
    EXPECT_EQ(text::count_occurrences("x<S>y<S><S>", "<S>"), 3u);
    EXPECT_EQ(text::count_occurrences("aaa", "aa"), 1u);
}

TEST(Text, FoldCaseIsUnicodeAware) {
    EXPECT_EQ(text::fold_case("Goal"), "goal");
    EXPECT_EQ(text::fold_case("ČESKÝ"), "český");
    EXPECT_EQ(text::fold_case("Straße"), "strasse");
}

TEST(Separator, RejectsEmptyAndWhitespace) {
    EXPECT_THROW(SeparatorToken(""), Error);
    EXPECT_THROW(SeparatorToken("<S EP>"), Error);
    EXPECT_NO_THROW(SeparatorToken("<SEP>"));
    try {
        SeparatorToken("a b");
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::config);
    }
}

TEST(Corpus, BlankLineTwoDocuments) {
    auto parsed = parse("s1\ns2\n\ns3\n");
    ASSERT_EQ(parsed.documents.size(), 2u);
    EXPECT_EQ(parsed.documents[0].sentences.size(), 2u);
    EXPECT_EQ(parsed.documents[1].sentences.size(), 1u);
    EXPECT_EQ(parsed.documents[0].doc_id, "d1");
    EXPECT_EQ(parsed.documents[1].doc_id, "d2");
    EXPECT_TRUE(parsed.warnings.empty());
}

TEST(Corpus, EmptyStream) {
    EXPECT_TRUE(parse("").documents.empty());
    EXPECT_TRUE(parse("", CorpusFormat::docid_tsv).documents.empty());
}

TEST(Corpus, ExtraBlankLinesSkippedWithWarning) {
    auto parsed = parse("\ns1\n\n\n\ns2\n");
    ASSERT_EQ(parsed.documents.size(), 2u);
    EXPECT_EQ(parsed.warnings.size(), 3u);
    EXPECT_EQ(parsed.warnings[0].line_number, 1u);
}

TEST(Corpus, CarriageReturnsStripped) {
    auto parsed = parse("a b\r\nc\r\n");
    ASSERT_EQ(parsed.documents.size(), 1u);
    EXPECT_EQ(parsed.documents[0].sentences[0].text(), "a b");
}

TEST(Corpus, TsvRows) {
    auto parsed = parse("d1\tA\nd1\tB\nd2\tC\n", CorpusFormat::docid_tsv);
    ASSERT_EQ(parsed.documents.size(), 2u);
    EXPECT_EQ(parsed.documents[0].doc_id, "d1");
    EXPECT_EQ(parsed.documents[0].sentences.size(), 2u);
    EXPECT_EQ(parsed.documents[1].doc_id, "d2");
    EXPECT_EQ(parsed.documents[1].sentences[0].text(), "C");
}

TEST(Corpus, TsvErrors) {
    try {
        parse("d1\tA\nd2\tB\nd1\tC\n", CorpusFormat::docid_tsv);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::duplicate_doc_id);
        EXPECT_EQ(e.category(), ErrorCategory::input);
    }
    try {
        parse("no tab here\n", CorpusFormat::docid_tsv);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::malformed_line);
    }
}

TEST(Corpus, SeparatorCollisionIsFatal) {
    SeparatorToken sep("<SEP>");
    try {
        parse("fine\nhas <SEP> inside\n", CorpusFormat::blank_line, &sep);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::separator_collision);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Corpus, RoundTripBothFormats) {
    std::mt19937_64 rng(7);
    std::vector<Document> docs;
    for (int i = 0; i < 20; ++i) docs.push_back(fixture::random_document(rng, "doc" + std::to_string(i), 1, 9));
    for (auto format : {CorpusFormat::blank_line, CorpusFormat::docid_tsv}) {
        std::ostringstream os;
        write_document_corpus(os, docs, format);
        auto parsed = parse(os.str(), format);
        ASSERT_EQ(parsed.documents.size(), docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) {
            EXPECT_EQ(parsed.documents[i].sentences, docs[i].sentences);
            if (format == CorpusFormat::docid_tsv) EXPECT_EQ(parsed.documents[i].doc_id, docs[i].doc_id);
        }
    }
}

TEST(Corpus, PairDocuments) {
    auto src = parse("a\nb\n\nc\n\nd\n").documents;
    auto tgt = parse("A\nB\n\nC\n\nD\n").documents;
    auto pairs = pair_documents(src, tgt);
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_EQ(pairs[0].size(), 2u);
    EXPECT_TRUE(pair_documents({}, {}).empty());
}

TEST(Corpus, PairDocumentsErrors) {
    auto five = fixture::make_document("x", {"1", "2", "3", "4", "5"});
    auto four = fixture::make_document("x", {"1", "2", "3", "4"});
    try {
        pair_documents(std::vector<Document>{five}, std::vector<Document>{four});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::sentence_count_mismatch);
        EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos);
    }
    try {
        pair_documents(std::vector<Document>{five}, std::vector<Document>{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::length_mismatch);
    }
    auto other = fixture::make_document("y", {"1", "2", "3", "4", "5"});
    EXPECT_THROW(pair_documents(std::vector<Document>{five}, std::vector<Document>{other}), Error);
}

TEST(Corpus, SpanCharLength) {
    EXPECT_EQ(span_char_length(sentences({"A b.", "C d e.", "F."})), 14u);
    EXPECT_EQ(span_char_length(sentences({"Hi."})), 3u);
    EXPECT_EQ(span_char_length(sentences({"a", "b"})), 3u);
    EXPECT_EQ(span_char_length(sentences({"Žluťoučký"})), 9u);
}

TEST(Corpus, SpanCharLengthConcatenationProperty) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        auto doc = fixture::random_document(rng, "d", 2, 12);
        std::span<const Sentence> all(doc.sentences);
        std::size_t cut = std::uniform_int_distribution<std::size_t>(1, all.size() - 1)(rng);
        EXPECT_EQ(span_char_length(all), span_char_length(all.first(cut)) + span_char_length(all.subspan(cut)) + 1);
    }
}
