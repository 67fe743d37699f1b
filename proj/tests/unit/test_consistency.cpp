#include <gtest/gtest.h>

#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "docspan/consistency.hpp"
#include "docspan/error.hpp"

using namespace docspan;

namespace {

SentenceLinks links(std::initializer_list<std::pair<std::size_t, std::size_t>> pairs) {
    SentenceLinks out;
    for (auto [s, t] : pairs) out.push_back({s, t});
    return out;
}

std::ifstream open_fixture(const std::string& name) {
    std::ifstream in(std::string(DOCSPAN_FIXTURES) + "/consistency/" + name);
    if (!in) throw std::runtime_error("missing fixture " + name);
    return in;
}

template <class F>
auto load(const std::string& name, F parse) {
    auto in = open_fixture(name);
    return parse(in);
}

struct System {
    TokenLines tokens, lemmas;
    std::vector<SentenceLinks> fwd, rev;
};

System load_system(const std::string& tag) {
    return {load(tag + ".tok", read_token_lines), load(tag + ".lem", read_token_lines),
            load(tag + ".fwd", parse_pharaoh), load(tag + ".rev", parse_pharaoh)};
}

struct Fixture {
    TokenLines src_tokens = load("src.tok", read_token_lines);
    TokenLines src_lemmas = load("src.lem", read_token_lines);
    std::vector<DocumentRange> ranges = load("docs.tsv", parse_document_ranges);
    System a = load_system("a");
    System b = load_system("b");

    std::vector<DocumentLemmaMap> maps(const System& s) const {
        return build_system_maps(ranges, src_tokens, src_lemmas, {&s.tokens, &s.lemmas, s.fwd, s.rev});
    }
};

std::optional<ErrorCode> code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

}  // namespace

TEST(Pharaoh, Parsing) {
    EXPECT_EQ(parse_pharaoh_line("0-0 1-2"), links({{0, 0}, {1, 2}}));
    EXPECT_TRUE(parse_pharaoh_line("").empty());
    EXPECT_EQ(parse_pharaoh_line("  3-1\t"), links({{3, 1}}));
    for (const char* bad : {"3-x", "3", "-1", "1-", "a-b", "1-2-3"}) {
        EXPECT_EQ(code_of([&] { parse_pharaoh_line(bad); }), ErrorCode::malformed_pair) << bad;
    }
    std::istringstream in("0-0\n\n1-1 2-2\n");
    auto all = parse_pharaoh(in);
    ASSERT_EQ(all.size(), 3u);
    EXPECT_TRUE(all[1].empty());
    std::istringstream bad("0-0\n0-x\n");
    try {
        parse_pharaoh(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("0-x"), std::string::npos);
    }
}

TEST(Intersect, Examples) {
    std::vector<SentenceLinks> fwd{links({{0, 0}, {1, 2}, {2, 1}})};
    std::vector<SentenceLinks> rev{links({{0, 0}, {2, 1}})};
    EXPECT_EQ(intersect_alignments(fwd, rev)[0], links({{0, 0}, {1, 2}}));
    EXPECT_EQ(intersect_alignments(fwd, rev, true)[0], links({{0, 0}, {2, 1}}));
    std::vector<SentenceLinks> short_rev;
    EXPECT_EQ(code_of([&] { intersect_alignments(fwd, short_rev); }), ErrorCode::sentence_count_mismatch);
}

TEST(Intersect, Properties) {
    std::mt19937_64 rng(3);
    auto random_links = [&] {
        SentenceLinks l;
        for (int k = 0; k < 8; ++k) l.push_back({rng() % 5, rng() % 5});
        return l;
    };
    for (int t = 0; t < 300; ++t) {
        std::vector<SentenceLinks> a{random_links()}, b{random_links()};
        auto ab = intersect_alignments(a, b, true)[0];
        auto ba = intersect_alignments(b, a, true)[0];
        EXPECT_EQ(ab, ba);
        EXPECT_TRUE(std::is_sorted(ab.begin(), ab.end()));
        for (const auto& l : ab) {
            EXPECT_NE(std::find(a[0].begin(), a[0].end(), l), a[0].end());
            EXPECT_NE(std::find(b[0].begin(), b[0].end(), l), b[0].end());
        }
        std::vector<SentenceLinks> once{ab};
        EXPECT_EQ(intersect_alignments(once, once, true)[0], ab);
    }
}

TEST(LemmaMap, Examples) {
    std::vector<SentenceLinks> l{links({{0, 0}, {1, 1}}), links({{0, 1}})};
    TokenLines src{{"The", "Goal"}, {"goal"}};
    TokenLines tgt{{"ten", "Cíl"}, {"x", "gól"}};
    auto map = build_lemma_map(l, src, tgt);
    ASSERT_EQ(map.count("goal"), 1u);
    ASSERT_EQ(map["goal"].size(), 2u);
    EXPECT_EQ(map["goal"][0].tgt_lemma, "cíl");
    EXPECT_EQ(map["goal"][1].sentence, 1u);
    EXPECT_EQ(map["goal"][1].tgt_lemma, "gól");

    LemmaMapOptions options;
    options.stoplist = {"the"};
    EXPECT_EQ(build_lemma_map(l, src, tgt, options).count("the"), 0u);

    std::vector<SentenceLinks> oob{links({{5, 0}}), {}};
    EXPECT_EQ(code_of([&] { build_lemma_map(oob, src, tgt); }), ErrorCode::index_out_of_range);
    std::vector<SentenceLinks> one{links({{0, 0}})};
    EXPECT_EQ(code_of([&] { build_lemma_map(one, src, tgt); }), ErrorCode::sentence_count_mismatch);
}

TEST(DocumentRanges, Parsing) {
    std::istringstream ok("a\t0\t2\nb\t2\t3\n");
    auto r = parse_document_ranges(ok);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[1].doc_id, "b");
    EXPECT_EQ(r[1].line_count, 3u);
    std::istringstream gap("a\t0\t2\nb\t3\t1\n");
    EXPECT_THROW(parse_document_ranges(gap), Error);
    std::istringstream junk("a\tzero\t2\n");
    EXPECT_THROW(parse_document_ranges(junk), Error);
}

TEST(Divergence, FixtureSystems) {
    Fixture fx;
    auto maps_a = fx.maps(fx.a);
    auto maps_b = fx.maps(fx.b);
    auto rec_a = find_divergences(maps_a);
    auto rec_b = find_divergences(maps_b);
    ASSERT_EQ(rec_a.size(), 4u);
    EXPECT_EQ(rec_b.size(), 0u);
    EXPECT_EQ(rec_a[0].doc_id, "d1");
    EXPECT_EQ(rec_a[0].src_lemma, "goal");
    EXPECT_EQ(rec_a[0].tgt_lemmas, (std::set<std::string>{"cíl", "gól"}));
    EXPECT_EQ(rec_a[1].src_lemma, "running");
    EXPECT_EQ(rec_a[2].src_lemma, "fight");
    EXPECT_EQ(rec_a[3].src_lemma, "settlement");
    EXPECT_EQ(rec_a[3].tgt_lemmas, (std::set<std::string>{"osada", "vyrovnání"}));

    auto cmp = compare_systems(maps_a, maps_b);
    ASSERT_EQ(cmp.size(), 4u);
    for (const auto& c : cmp) {
        EXPECT_EQ(c.count_a, 2u);
        EXPECT_EQ(c.count_b, 1u);
    }
    auto json = comparison_json(cmp[0]);
    EXPECT_NE(json.find("\"goal\""), std::string::npos);
    EXPECT_NE(divergence_json(rec_a[0]).find("gól"), std::string::npos);
}

TEST(Compare, AntisymmetricAndAbsentCountsZero) {
    Fixture fx;
    auto maps_a = fx.maps(fx.a);
    auto maps_b = fx.maps(fx.b);
    auto ab = compare_systems(maps_a, maps_b);
    auto ba = compare_systems(maps_b, maps_a);
    ASSERT_EQ(ab.size(), ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i) {
        EXPECT_EQ(ab[i].src_lemma, ba[i].src_lemma);
        EXPECT_EQ(ab[i].count_a, ba[i].count_b);
        EXPECT_EQ(ab[i].count_b, ba[i].count_a);
    }
    EXPECT_TRUE(compare_systems(maps_a, maps_a).empty());

    std::vector<DocumentLemmaMap> x{{"d", {}}}, y{{"d", {}}};
    x[0].map["goal"].push_back({0, 0, 0, "cíl"});
    auto cmp = compare_systems(x, y);
    ASSERT_EQ(cmp.size(), 1u);
    EXPECT_EQ(cmp[0].count_a, 1u);
    EXPECT_EQ(cmp[0].count_b, 0u);
    CompareOptions divergent;
    divergent.divergent_only = true;
    EXPECT_TRUE(compare_systems(x, y, divergent).empty());
    std::vector<DocumentLemmaMap> other{{"e", {}}};
    EXPECT_THROW(compare_systems(x, other), Error);
}

TEST(Review, MarksAlignedTokens) {
    Fixture fx;
    auto maps_a = fx.maps(fx.a);
    auto maps_b = fx.maps(fx.b);
    auto cmp = compare_systems(maps_a, maps_b);
    ReviewContext ctx{fx.ranges, &fx.src_tokens, &fx.a.tokens, &fx.b.tokens, maps_a, maps_b};
    auto sheet = render_review(cmp, ctx);
    EXPECT_NE(sheet.find("[[goal]]"), std::string::npos);
    EXPECT_NE(sheet.find("[[gól]]"), std::string::npos);
    EXPECT_NE(sheet.find("[[vyrovnání]]"), std::string::npos);
    EXPECT_EQ(render_review({}, ctx), "");
}

TEST(SystemMaps, RangesMustCoverLines) {
    Fixture fx;
    std::vector<DocumentRange> partial{fx.ranges[0]};
    EXPECT_THROW(build_system_maps(partial, fx.src_tokens, fx.src_lemmas,
                                   {&fx.a.tokens, &fx.a.lemmas, fx.a.fwd, fx.a.rev}),
                 Error);
}
