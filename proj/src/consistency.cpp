#include "docspan/consistency.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <sstream>

#include "json.hpp"

#include "docspan/error.hpp"
#include "docspan/text.hpp"

namespace docspan {

namespace {

bool parse_index(std::string_view s, std::size_t& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

SentenceLinks parse_pharaoh_line(std::string_view line, std::size_t line_number) {
    SentenceLinks links;
    for (auto token : text::split_words(line)) {
        auto dash = token.find('-');
        AlignmentLink link;
        if (dash == std::string_view::npos || !parse_index(token.substr(0, dash), link.src_index) ||
            !parse_index(token.substr(dash + 1), link.tgt_index)) {
            throw Error(ErrorCode::malformed_pair,
                        "line " + std::to_string(line_number) + ": malformed alignment pair '" + std::string(token) + "'");
        }
        links.push_back(link);
    }
    return links;
}

std::vector<SentenceLinks> parse_pharaoh(std::istream& in) {
    std::vector<SentenceLinks> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) out.push_back(parse_pharaoh_line(line, ++line_number));
    return out;
}

std::vector<SentenceLinks> intersect_alignments(std::span<const SentenceLinks> forward,
                                                std::span<const SentenceLinks> reverse, bool reverse_is_flipped) {
    if (forward.size() != reverse.size()) {
        throw Error(ErrorCode::sentence_count_mismatch, "forward alignment has " + std::to_string(forward.size()) +
                                                            " sentences, reverse has " +
                                                            std::to_string(reverse.size()));
    }
    std::vector<SentenceLinks> out(forward.size());
    for (std::size_t s = 0; s < forward.size(); ++s) {
        SentenceLinks f = forward[s];
        SentenceLinks r = reverse[s];
        if (!reverse_is_flipped) {
            for (auto& link : r) std::swap(link.src_index, link.tgt_index);
        }
        std::sort(f.begin(), f.end());
        f.erase(std::unique(f.begin(), f.end()), f.end());
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        std::set_intersection(f.begin(), f.end(), r.begin(), r.end(), std::back_inserter(out[s]));
    }
    return out;
}

TokenLines read_token_lines(std::istream& in) {
    TokenLines out;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> tokens;
        for (auto w : text::split_words(line)) tokens.emplace_back(w);
        out.push_back(std::move(tokens));
    }
    return out;
}

std::vector<DocumentRange> parse_document_ranges(std::istream& in) {
    std::vector<DocumentRange> out;
    std::string line;
    std::size_t line_number = 0;
    std::size_t expected_first = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (auto tab = rest.find('\t'); tab != std::string_view::npos; tab = rest.find('\t')) {
            fields.push_back(rest.substr(0, tab));
            rest = rest.substr(tab + 1);
        }
        fields.push_back(rest);
        DocumentRange range;
        if (fields.size() != 3 || fields[0].empty() || !parse_index(fields[1], range.first_line) ||
            !parse_index(fields[2], range.line_count)) {
            throw Error(ErrorCode::malformed_line,
                        "document ranges line " + std::to_string(line_number) + ": expected doc_id<TAB>first<TAB>count");
        }
        if (range.first_line != expected_first) {
            throw Error(ErrorCode::malformed_line, "document ranges line " + std::to_string(line_number) +
                                                       ": ranges must be contiguous, expected first line " +
                                                       std::to_string(expected_first));
        }
        range.doc_id = std::string(fields[0]);
        expected_first = range.first_line + range.line_count;
        out.push_back(std::move(range));
    }
    return out;
}

LemmaMap build_lemma_map(std::span<const SentenceLinks> links, const TokenLines& src_lemmas,
                         const TokenLines& tgt_lemmas, const LemmaMapOptions& options) {
    if (links.size() != src_lemmas.size() || links.size() != tgt_lemmas.size()) {
        throw Error(ErrorCode::sentence_count_mismatch,
                    "lemma map: " + std::to_string(links.size()) + " alignment lines, " +
                        std::to_string(src_lemmas.size()) + " source lemma lines, " +
                        std::to_string(tgt_lemmas.size()) + " target lemma lines");
    }
    LemmaMap map;
    for (std::size_t s = 0; s < links.size(); ++s) {
        for (const auto& link : links[s]) {
            if (link.src_index >= src_lemmas[s].size() || link.tgt_index >= tgt_lemmas[s].size()) {
                throw Error(ErrorCode::index_out_of_range,
                            "sentence " + std::to_string(s + 1) + ": link " + std::to_string(link.src_index) + "-" +
                                std::to_string(link.tgt_index) + " exceeds lemma counts " +
                                std::to_string(src_lemmas[s].size()) + "/" + std::to_string(tgt_lemmas[s].size()));
            }
            std::string src = text::fold_case(src_lemmas[s][link.src_index]);
            if (options.stoplist.contains(src)) continue;
            map[src].push_back({s, link.src_index, link.tgt_index, text::fold_case(tgt_lemmas[s][link.tgt_index])});
        }
    }
    return map;
}

namespace {

void check_lines(const TokenLines& tokens, const TokenLines& lemmas, const char* what) {
    if (tokens.size() != lemmas.size()) {
        throw Error(ErrorCode::sentence_count_mismatch, std::string(what) + ": " + std::to_string(tokens.size()) +
                                                            " token lines vs " + std::to_string(lemmas.size()) +
                                                            " lemma lines");
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].size() != lemmas[i].size()) {
            throw Error(ErrorCode::sentence_count_mismatch,
                        std::string(what) + " line " + std::to_string(i + 1) + ": " + std::to_string(tokens[i].size()) +
                            " tokens vs " + std::to_string(lemmas[i].size()) + " lemmas");
        }
    }
}

}  // namespace

std::vector<DocumentLemmaMap> build_system_maps(std::span<const DocumentRange> ranges, const TokenLines& source_tokens,
                                                const TokenLines& source_lemmas, const SystemFiles& system,
                                                const LemmaMapOptions& options, bool reverse_is_flipped) {
    check_lines(source_tokens, source_lemmas, "source");
    if (system.target_tokens) check_lines(*system.target_tokens, *system.target_lemmas, "target");
    const TokenLines& tgt_lemmas = *system.target_lemmas;
    if (tgt_lemmas.size() != source_lemmas.size()) {
        throw Error(ErrorCode::sentence_count_mismatch, "source has " + std::to_string(source_lemmas.size()) +
                                                            " lines, target has " + std::to_string(tgt_lemmas.size()));
    }
    auto links = intersect_alignments(system.forward, system.reverse, reverse_is_flipped);
    if (links.size() != source_lemmas.size()) {
        throw Error(ErrorCode::sentence_count_mismatch, "alignments have " + std::to_string(links.size()) +
                                                            " lines, corpus has " +
                                                            std::to_string(source_lemmas.size()));
    }
    std::size_t covered = ranges.empty() ? 0 : ranges.back().first_line + ranges.back().line_count;
    if (covered != source_lemmas.size()) {
        throw Error(ErrorCode::sentence_count_mismatch, "document ranges cover " + std::to_string(covered) +
                                                            " lines, corpus has " +
                                                            std::to_string(source_lemmas.size()));
    }

    std::vector<DocumentLemmaMap> out;
    out.reserve(ranges.size());
    for (const auto& range : ranges) {
        auto slice = [&](const TokenLines& lines) {
            return TokenLines(lines.begin() + static_cast<std::ptrdiff_t>(range.first_line),
                              lines.begin() + static_cast<std::ptrdiff_t>(range.first_line + range.line_count));
        };
        auto doc_links = std::span<const SentenceLinks>(links).subspan(range.first_line, range.line_count);
        out.push_back({range.doc_id, build_lemma_map(doc_links, slice(source_lemmas), slice(tgt_lemmas), options)});
    }
    return out;
}

namespace {

std::set<std::string> distinct_targets(const std::vector<LemmaOccurrence>& occurrences) {
    std::set<std::string> out;
    for (const auto& o : occurrences) out.insert(o.tgt_lemma);
    return out;
}

}  // namespace

std::vector<DivergenceRecord> find_divergences(std::span<const DocumentLemmaMap> docs) {
    std::vector<DivergenceRecord> out;
    for (const auto& doc : docs) {
        for (const auto& [lemma, occurrences] : doc.map) {
            auto targets = distinct_targets(occurrences);
            if (targets.size() >= 2) out.push_back({doc.doc_id, lemma, std::move(targets), occurrences});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const DivergenceRecord& a, const DivergenceRecord& b) {
        return std::tie(a.doc_id, a.src_lemma) < std::tie(b.doc_id, b.src_lemma);
    });
    return out;
}

std::string divergence_json(const DivergenceRecord& record) {
    nlohmann::ordered_json j;
    j["doc_id"] = record.doc_id;
    j["src_lemma"] = record.src_lemma;
    j["tgt_lemmas"] = record.tgt_lemmas;
    auto occ = nlohmann::ordered_json::array();
    for (const auto& o : record.occurrences) {
        occ.push_back({{"sentence", o.sentence}, {"src", o.src_token}, {"tgt", o.tgt_token}, {"tgt_lemma", o.tgt_lemma}});
    }
    j["occurrences"] = occ;
    return j.dump();
}

std::vector<SystemComparison> compare_systems(std::span<const DocumentLemmaMap> a, std::span<const DocumentLemmaMap> b,
                                              const CompareOptions& options) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::length_mismatch, "systems cover " + std::to_string(a.size()) + " and " +
                                                    std::to_string(b.size()) + " documents");
    }
    std::vector<SystemComparison> out;
    for (std::size_t d = 0; d < a.size(); ++d) {
        if (a[d].doc_id != b[d].doc_id) {
            throw Error(ErrorCode::doc_id_mismatch,
                        "document " + std::to_string(d + 1) + ": '" + a[d].doc_id + "' vs '" + b[d].doc_id + "'");
        }
        std::set<std::string> lemmas;
        for (const auto& [lemma, _] : a[d].map) lemmas.insert(lemma);
        for (const auto& [lemma, _] : b[d].map) lemmas.insert(lemma);
        for (const auto& lemma : lemmas) {
            auto count = [&](const LemmaMap& m) {
                auto it = m.find(lemma);
                return it == m.end() ? std::size_t{0} : distinct_targets(it->second).size();
            };
            std::size_t ca = count(a[d].map);
            std::size_t cb = count(b[d].map);
            if (ca == cb) continue;
            if (options.divergent_only && std::max(ca, cb) < 2) continue;
            out.push_back({a[d].doc_id, lemma, ca, cb});
        }
    }
    return out;
}

std::string comparison_json(const SystemComparison& entry) {
    nlohmann::ordered_json j;
    j["doc_id"] = entry.doc_id;
    j["src_lemma"] = entry.src_lemma;
    j["count_a"] = entry.count_a;
    j["count_b"] = entry.count_b;
    return j.dump();
}

namespace {

std::string highlight(const std::vector<std::string>& tokens, const std::set<std::size_t>& marked) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        if (marked.contains(i)) out += "[[" + tokens[i] + "]]";
        else out += tokens[i];
    }
    return out;
}

}  // namespace

std::string render_review(std::span<const SystemComparison> entries, const ReviewContext& context) {
    std::ostringstream os;
    auto find_doc = [](std::span<const DocumentLemmaMap> maps, const std::string& id) -> const LemmaMap* {
        for (const auto& m : maps) {
            if (m.doc_id == id) return &m.map;
        }
        return nullptr;
    };
    auto find_range = [&](const std::string& id) -> const DocumentRange* {
        for (const auto& r : context.ranges) {
            if (r.doc_id == id) return &r;
        }
        return nullptr;
    };

    for (const auto& entry : entries) {
        os << "== " << entry.doc_id << "  " << entry.src_lemma << "  A:" << entry.count_a << " B:" << entry.count_b
           << '\n';
        const DocumentRange* range = find_range(entry.doc_id);
        const LemmaMap* map_a = find_doc(context.maps_a, entry.doc_id);
        const LemmaMap* map_b = find_doc(context.maps_b, entry.doc_id);

        // sentence -> (source tokens, A target tokens, B target tokens, A lemmas, B lemmas)
        struct Marks {
            std::set<std::size_t> src, tgt_a, tgt_b;
            std::set<std::string> lemmas_a, lemmas_b;
        };
        std::map<std::size_t, Marks> sentences;
        auto collect = [&](const LemmaMap* map, bool is_a) {
            if (!map) return;
            auto it = map->find(entry.src_lemma);
            if (it == map->end()) return;
            for (const auto& o : it->second) {
                auto& m = sentences[o.sentence];
                m.src.insert(o.src_token);
                (is_a ? m.tgt_a : m.tgt_b).insert(o.tgt_token);
                (is_a ? m.lemmas_a : m.lemmas_b).insert(o.tgt_lemma);
            }
        };
        collect(map_a, true);
        collect(map_b, false);

        for (const auto& [sentence, marks] : sentences) {
            os << "  sentence " << sentence + 1 << '\n';
            if (!range) continue;
            std::size_t line = range->first_line + sentence;
            auto show = [&](const char* tag, const TokenLines* lines, const std::set<std::size_t>& marked) {
                if (lines && line < lines->size()) os << "    " << tag << highlight((*lines)[line], marked) << '\n';
            };
            show("src: ", context.source, marks.src);
            show("A:   ", context.target_a, marks.tgt_a);
            show("B:   ", context.target_b, marks.tgt_b);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace docspan
