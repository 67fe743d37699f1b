#include "docspan/schedule.hpp"

#include <algorithm>

#include "json.hpp"

#include "docspan/error.hpp"
#include "docspan/text.hpp"

namespace docspan {

void WindowLimits::validate() const {
    if (main_max < 1) throw Error(ErrorCode::config_invalid, "main limit must be at least 1");
}

void ScheduleConfig::validate() const {
    limits.validate();
    if (nonoverlap_limit < 1) throw Error(ErrorCode::config_invalid, "non-overlapping limit must be at least 1");
}

namespace {

/// Scalar offset of every sentence start in the joined document text.
std::vector<std::size_t> sentence_offsets(const Document& doc) {
    std::vector<std::size_t> offsets(doc.sentences.size() + 1, 0);
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
        offsets[i + 1] = offsets[i] + doc.sentences[i].char_len() + 1;
    }
    return offsets;
}

/// Longest suffix of `s` that begins a word and has at most `budget` scalars.
/// Returns the scalar offset where it starts, or nullopt if none fits.
std::optional<std::size_t> word_suffix_start(std::string_view s, std::size_t budget) {
    const std::size_t total = text::scalar_count(s);
    std::size_t scalar = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0U) == 0x80U) continue;
        bool starts_word = i > 0 && text::is_space(s[i - 1]) && !text::is_space(s[i]);
        if (starts_word && total - scalar <= budget) return scalar;
        ++scalar;
    }
    return std::nullopt;
}

struct PreContext {
    std::vector<std::string> pieces;
    std::size_t first_sentence = 0;
    std::size_t fragment_offset = 0;  // scalars into first_sentence
    bool fragment = false;
};

PreContext plan_pre_context(const Document& doc, std::size_t main_start, std::size_t pre_max) {
    PreContext pre;
    pre.first_sentence = main_start;
    if (main_start == 0 || pre_max == 0) return pre;

    // Whole sentences first, walking backwards while they fit.
    std::size_t first_whole = main_start;
    std::size_t whole_chars = 0;
    while (first_whole > 0) {
        std::size_t add = doc.sentences[first_whole - 1].char_len() + (first_whole < main_start ? 1 : 0);
        if (whole_chars + add > pre_max) break;
        whole_chars += add;
        --first_whole;
    }
    pre.first_sentence = first_whole;

    if (first_whole > 0) {
        std::size_t join = first_whole < main_start ? 1 : 0;
        if (pre_max > whole_chars + join) {
            const std::string& partial = doc.sentences[first_whole - 1].text();
            if (auto at = word_suffix_start(partial, pre_max - whole_chars - join)) {
                pre.fragment = true;
                pre.fragment_offset = *at;
                pre.first_sentence = first_whole - 1;
                pre.pieces.push_back(partial.substr(text::byte_offset_of_scalar(partial, *at)));
            }
        }
    }
    for (std::size_t i = first_whole; i < main_start; ++i) pre.pieces.push_back(doc.sentences[i].text());
    return pre;
}

std::span<const Sentence> sentences_of(const Document& doc, SentenceSpan span) {
    return std::span<const Sentence>(doc.sentences).subspan(span.start, span.len);
}

}  // namespace

std::vector<WindowPlan> plan_windows(const Document& doc, const WindowLimits& limits) {
    limits.validate();
    const auto offsets = sentence_offsets(doc);
    const std::size_t n = doc.sentences.size();
    std::vector<WindowPlan> plans;

    std::size_t start = 0;
    while (start < n) {
        WindowPlan plan;
        plan.doc_id = doc.doc_id;
        plan.index = plans.size();

        PreContext pre = plan_pre_context(doc, start, limits.pre_max);
        plan.pre_pieces = std::move(pre.pieces);
        plan.pre_first_sentence = pre.first_sentence;
        plan.pre_fragment = pre.fragment;
        for (std::size_t i = 0; i < plan.pre_pieces.size(); ++i) {
            if (i > 0) plan.pre_text += ' ';
            plan.pre_text += plan.pre_pieces[i];
        }
        plan.pre_chars = text::scalar_count(plan.pre_text);
        if (plan.pre_pieces.empty()) {
            plan.pre_range = {offsets[start], offsets[start]};
        } else {
            plan.pre_range = {offsets[pre.first_sentence] + pre.fragment_offset, offsets[start] - 1};
        }

        std::size_t len = 1;
        std::size_t chars = doc.sentences[start].char_len();
        while (start + len < n && chars + 1 + doc.sentences[start + len].char_len() <= limits.main_max) {
            chars += 1 + doc.sentences[start + len].char_len();
            ++len;
        }
        plan.main = {start, len};
        plan.main_chars = chars;
        plan.oversized = chars > limits.main_max;

        std::size_t used = plan.pre_chars + plan.main_chars;
        plan.post = {start + len, 0};
        if (used <= limits.total_max) {
            std::size_t budget = limits.total_max - used;
            std::size_t post_chars = 0;
            std::size_t next = start + len;
            while (next < n) {
                std::size_t add = doc.sentences[next].char_len() + (next > start + len ? 1 : 0);
                if (post_chars + add > budget) break;
                post_chars += add;
                ++next;
            }
            plan.post.len = next - (start + len);
            plan.post_chars = post_chars;
        }

        plans.push_back(std::move(plan));
        start += len;
    }
    return plans;
}

std::vector<SentenceSpan> plan_nonoverlapping(const Document& doc, std::size_t limit) {
    std::vector<SentenceSpan> spans;
    const std::size_t n = doc.sentences.size();
    std::size_t start = 0;
    while (start < n) {
        std::size_t len = 1;
        std::size_t chars = doc.sentences[start].char_len();
        while (start + len < n && chars + 1 + doc.sentences[start + len].char_len() <= limit) {
            chars += 1 + doc.sentences[start + len].char_len();
            ++len;
        }
        spans.push_back({start, len});
        start += len;
    }
    return spans;
}

std::vector<WindowPlan> plans_from_spans(const Document& doc, std::span<const SentenceSpan> spans, std::size_t limit) {
    const auto offsets = sentence_offsets(doc);
    std::vector<WindowPlan> plans;
    plans.reserve(spans.size());
    for (const auto& span : spans) {
        WindowPlan plan;
        plan.doc_id = doc.doc_id;
        plan.index = plans.size();
        plan.pre_first_sentence = span.start;
        plan.pre_range = {offsets[span.start], offsets[span.start]};
        plan.main = span;
        plan.main_chars = span_char_length(sentences_of(doc, span));
        plan.oversized = plan.main_chars > limit;
        plan.post = {span.end(), 0};
        plans.push_back(std::move(plan));
    }
    return plans;
}

std::vector<WindowPlan> plan_document(const Document& doc, const ScheduleConfig& config) {
    if (config.mode == DecodeMode::windows) return plan_windows(doc, config.limits);
    auto spans = plan_nonoverlapping(doc, config.nonoverlap_limit);
    return plans_from_spans(doc, spans, config.nonoverlap_limit);
}

std::string encode_window(const WindowPlan& plan, const Document& doc, const SeparatorToken& sep) {
    std::vector<std::string> parts = plan.pre_pieces;
    for (std::size_t i = plan.main.start; i < plan.post.end(); ++i) parts.push_back(doc.sentences[i].text());
    return text::join_with_separator(parts, sep.str());
}

std::string plan_dump_line(const WindowPlan& plan) {
    nlohmann::ordered_json j;
    j["doc_id"] = plan.doc_id;
    j["window"] = plan.index;
    j["pre"] = {plan.pre_range.begin, plan.pre_range.end};
    j["pre_chars"] = plan.pre_chars;
    j["pre_pieces"] = plan.pre_pieces.size();
    j["main"] = {plan.main.start, plan.main.len};
    j["main_chars"] = plan.main_chars;
    j["post"] = {plan.post.start, plan.post.len};
    j["post_chars"] = plan.post_chars;
    j["expected_parts"] = plan.expected_parts();
    j["oversized"] = plan.oversized;
    return j.dump();
}

StitchedTranslation stitch(std::span<const WindowPlan> plans, std::span<const TranslationResponse> translations,
                           const SeparatorToken& sep) {
    if (plans.size() != translations.size()) {
        throw Error(ErrorCode::translator_unavailable, "stitch: " + std::to_string(translations.size()) +
                                                           " translations for " + std::to_string(plans.size()) +
                                                           " windows");
    }
    StitchedTranslation out;
    if (!plans.empty()) out.doc_id = plans.front().doc_id;

    for (std::size_t w = 0; w < plans.size(); ++w) {
        const WindowPlan& plan = plans[w];
        const TranslationResponse& response = translations[w];
        bool usable = response.ok() && !text::trim(response.text).empty();
        std::vector<std::string> parts;
        if (usable) {
            parts = text::split_on_separator(response.text, sep.str());
            usable = parts.size() == plan.expected_parts();
        }
        const std::size_t first = plan.pre_pieces.size();
        for (std::size_t k = 0; k < plan.main.len; ++k) {
            if (usable) {
                out.sentences.push_back(std::move(parts[first + k]));
            } else {
                out.backup_indices.push_back(out.sentences.size());
                out.sentences.emplace_back();
            }
        }
    }
    return out;
}

std::vector<DocumentRun> run_documents(std::span<const Document> docs, const ScheduleConfig& config,
                                       Translator& translator, const SeparatorToken& sep, RequestIds& ids) {
    config.validate();
    check_separator(docs, sep);

    std::vector<DocumentRun> runs(docs.size());
    std::vector<TranslationRequest> requests;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        runs[d].plans = plan_document(docs[d], config);
        for (const auto& plan : runs[d].plans) requests.push_back({ids.take(), encode_window(plan, docs[d], sep)});
    }
    auto responses = translate_checked(translator, requests);

    std::vector<TranslationRequest> backups;
    std::vector<std::pair<std::size_t, std::size_t>> backup_slots;  // (document, sentence)
    std::size_t offset = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto count = runs[d].plans.size();
        runs[d].translation = stitch(runs[d].plans, std::span(responses).subspan(offset, count), sep);
        runs[d].translation.doc_id = docs[d].doc_id;
        offset += count;
        for (std::size_t i : runs[d].translation.backup_indices) {
            backups.push_back({ids.take(), docs[d].sentences[i].text()});
            backup_slots.emplace_back(d, i);
        }
    }

    auto backup_responses = translate_checked(translator, backups);
    for (std::size_t b = 0; b < backups.size(); ++b) {
        const auto& response = backup_responses[b];
        if (!response.ok()) {
            throw Error(ErrorCode::per_request_failure, "backup translation of document '" +
                                                            docs[backup_slots[b].first].doc_id + "' sentence " +
                                                            std::to_string(backup_slots[b].second + 1) +
                                                            " failed: " + *response.failure);
        }
        runs[backup_slots[b].first].translation.sentences[backup_slots[b].second] = response.text;
    }
    return runs;
}

DocumentRun run_document(const Document& doc, const ScheduleConfig& config, Translator& translator,
                         const SeparatorToken& sep, RequestIds& ids) {
    auto runs = run_documents(std::span(&doc, 1), config, translator, sep, ids);
    return std::move(runs.front());
}

}  // namespace docspan
