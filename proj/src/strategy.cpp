#include "docspan/strategy.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include "json.hpp"

#include "docspan/error.hpp"
#include "docspan/text.hpp"

namespace docspan {

PositionLabel PositionLabel::make(std::size_t position, std::size_t context_size) {
    if (position < 1 || position > context_size || context_size > 3) {
        throw Error(ErrorCode::config_invalid,
                    fmt::format("invalid position label {}/{}", position, context_size));
    }
    return PositionLabel{position, context_size};
}

PositionLabel PositionLabel::parse(std::string_view s) {
    auto slash = s.find('/');
    std::size_t position = 0;
    std::size_t size = 0;
    bool ok = slash != std::string_view::npos;
    if (ok) {
        auto a = std::from_chars(s.data(), s.data() + slash, position);
        auto b = std::from_chars(s.data() + slash + 1, s.data() + s.size(), size);
        ok = a.ec == std::errc{} && a.ptr == s.data() + slash && b.ec == std::errc{} && b.ptr == s.data() + s.size();
    }
    if (!ok) throw Error(ErrorCode::config_invalid, "cannot parse position label '" + std::string(s) + "'");
    return make(position, size);
}

std::string PositionLabel::str() const { return fmt::format("{}/{}", position, context_size); }

std::string PositionLabel::ordinal() const {
    static constexpr std::array<std::string_view, 4> suffix{"", "st", "nd", "rd"};
    return fmt::format("{}{}/{}", position, suffix[position], context_size);
}

const std::array<PositionLabel, 6>& all_labels() {
    static const std::array<PositionLabel, 6> labels{
        PositionLabel{1, 3}, PositionLabel{2, 3}, PositionLabel{3, 3},
        PositionLabel{1, 2}, PositionLabel{2, 2}, PositionLabel{1, 1},
    };
    return labels;
}

std::vector<PositionLabel> default_cascade() {
    return {PositionLabel{2, 3}, PositionLabel{1, 3}, PositionLabel{2, 2}, PositionLabel{1, 2}, PositionLabel{1, 1}};
}

std::vector<PositionLabel> parse_cascade(std::string_view s) {
    std::vector<PositionLabel> out;
    while (!s.empty()) {
        auto comma = s.find(',');
        auto item = text::trim(s.substr(0, comma));
        if (!item.empty()) {
            auto label = PositionLabel::parse(item);
            if (std::find(out.begin(), out.end(), label) != out.end()) {
                throw Error(ErrorCode::config_invalid, "label " + label.str() + " repeated in cascade");
            }
            out.push_back(label);
        }
        s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
    }
    if (out.empty()) throw Error(ErrorCode::config_invalid, "cascade is empty");
    return out;
}

std::string format_cascade(std::span<const PositionLabel> cascade) {
    std::string out;
    for (const auto& label : cascade) {
        if (!out.empty()) out += ',';
        out += label.str();
    }
    return out;
}

std::vector<ContextCandidate> build_candidates(std::size_t doc_size, std::size_t sentence_index) {
    std::vector<ContextCandidate> out;
    if (sentence_index >= doc_size) return out;
    for (const auto& label : all_labels()) {
        if (sentence_index + 1 < label.position) continue;
        std::size_t start = sentence_index + 1 - label.position;
        if (start + label.context_size > doc_size) continue;
        out.push_back({label, {start, label.context_size}});
    }
    return out;
}

void ValidityRules::validate() const {
    if (max_word_repeats < 1 || max_word_len < 1) {
        throw Error(ErrorCode::config_invalid, "validity thresholds must be at least 1");
    }
}

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
    case Verdict::valid: return "valid";
    case Verdict::sentence_count: return "sentence_count";
    case Verdict::word_repeat: return "word_repeat";
    case Verdict::word_length: return "word_length";
    case Verdict::backend_failure: return "backend_failure";
    }
    return "unknown";
}

Verdict check_validity(std::string_view decoded, std::size_t expected_sentences, const ValidityRules& rules,
                       const SeparatorToken& sep) {
    if (text::count_occurrences(decoded, sep.str()) + 1 != expected_sentences) return Verdict::sentence_count;

    auto words = text::split_words(decoded);
    std::unordered_map<std::string_view, std::size_t> counts;
    bool too_long = false;
    for (auto w : words) {
        if (w == sep.str()) continue;
        if (++counts[w] > rules.max_word_repeats) return Verdict::word_repeat;
        if (!too_long && text::scalar_count(w) > rules.max_word_len) too_long = true;
    }
    return too_long ? Verdict::word_length : Verdict::valid;
}

CandidateTranslation evaluate_candidate(std::size_t sentence_index, const ContextCandidate& candidate,
                                        const TranslationResponse& response, const ValidityRules& rules,
                                        const SeparatorToken& sep) {
    CandidateTranslation out;
    out.sentence_index = sentence_index;
    out.label = candidate.label;
    out.span = candidate.span;
    out.decoded = response.text;
    if (!response.ok()) {
        out.verdict = Verdict::backend_failure;
        return out;
    }
    out.verdict = check_validity(response.text, candidate.label.context_size, rules, sep);
    if (out.verdict == Verdict::valid) {
        out.extracted = text::split_on_separator(response.text, sep.str())[candidate.label.position - 1];
    }
    return out;
}

Selection select_final(std::span<const CandidateTranslation> candidates, std::span<const PositionLabel> cascade) {
    for (const auto& label : cascade) {
        for (const auto& c : candidates) {
            if (c.label == label && c.verdict == Verdict::valid) return {*c.extracted, label};
        }
    }
    std::size_t index = candidates.empty() ? 0 : candidates.front().sentence_index;
    throw Error(ErrorCode::no_valid_candidate, "no valid candidate for sentence " + std::to_string(index + 1));
}

Translator& PositionalBackends::for_label(const PositionLabel& label) const {
    if (auto it = overrides.find(label); it != overrides.end() && it->second) return *it->second;
    if (!fallback) throw Error(ErrorCode::config_invalid, "no backend configured for label " + label.str());
    return *fallback;
}

std::string PositionalStats::table() const {
    std::ostringstream os;
    os << fmt::format("{:<6} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8}\n", "label", "chosen", "validated",
                      "count", "repeat", "wordlen", "failed");
    for (const auto& label : all_labels()) {
        auto it = per_label.find(label);
        LabelStats s = it == per_label.end() ? LabelStats{} : it->second;
        auto inv = [&](Verdict v) {
            auto f = s.invalid.find(v);
            return f == s.invalid.end() ? std::size_t{0} : f->second;
        };
        os << fmt::format("{:<6} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8}\n", label.ordinal(), s.chosen, s.validated,
                          inv(Verdict::sentence_count), inv(Verdict::word_repeat), inv(Verdict::word_length),
                          inv(Verdict::backend_failure));
    }
    os << fmt::format("sentences {}  requests {}  no-valid {}\n", sentences, requests, no_valid);
    return os.str();
}

std::vector<std::string> PositionalStats::jsonl() const {
    std::vector<std::string> lines;
    for (const auto& label : all_labels()) {
        auto it = per_label.find(label);
        LabelStats s = it == per_label.end() ? LabelStats{} : it->second;
        nlohmann::ordered_json j;
        j["label"] = label.str();
        j["chosen"] = s.chosen;
        j["validated"] = s.validated;
        nlohmann::ordered_json inv = nlohmann::ordered_json::object();
        for (auto v : {Verdict::sentence_count, Verdict::word_repeat, Verdict::word_length, Verdict::backend_failure}) {
            auto f = s.invalid.find(v);
            inv[std::string(to_string(v))] = f == s.invalid.end() ? 0 : f->second;
        }
        j["invalid"] = inv;
        lines.push_back(j.dump());
    }
    return lines;
}

void PositionalStats::merge(const PositionalStats& other) {
    for (const auto& [label, s] : other.per_label) {
        auto& mine = per_label[label];
        mine.chosen += s.chosen;
        mine.validated += s.validated;
        for (const auto& [v, n] : s.invalid) mine.invalid[v] += n;
    }
    sentences += other.sentences;
    requests += other.requests;
    no_valid += other.no_valid;
}

PositionalResult run_document_positional(const Document& doc, const PositionalBackends& backends,
                                         const PositionalConfig& config, const SeparatorToken& sep,
                                         RequestIds& ids) {
    config.rules.validate();
    check_separator(std::span(&doc, 1), sep);
    const std::size_t n = doc.sentences.size();

    using SpanKey = std::pair<std::size_t, std::size_t>;
    struct BackendQueue {
        std::map<SpanKey, std::size_t> slot;  // span -> request index
        std::vector<TranslationRequest> requests;
        std::vector<TranslationResponse> responses;
    };
    std::map<Translator*, BackendQueue> queues;

    auto cascade_has = [&](const PositionLabel& label) {
        return std::find(config.cascade.begin(), config.cascade.end(), label) != config.cascade.end();
    };

    std::vector<std::vector<ContextCandidate>> per_sentence(n);
    for (std::size_t i = 0; i < n; ++i) {
        per_sentence[i] = build_candidates(n, i);
        for (const auto& c : per_sentence[i]) {
            if (!cascade_has(c.label)) continue;
            auto& queue = queues[&backends.for_label(c.label)];
            SpanKey key{c.span.start, c.span.len};
            if (queue.slot.contains(key)) continue;
            queue.slot[key] = queue.requests.size();
            std::vector<std::string> parts;
            for (std::size_t k = c.span.start; k < c.span.end(); ++k) parts.push_back(doc.sentences[k].text());
            queue.requests.push_back({ids.take(), text::join_with_separator(parts, sep.str())});
        }
    }

    PositionalResult result;
    result.translated.doc_id = doc.doc_id;
    result.chosen.resize(n);
    result.stats.sentences = n;
    for (auto& [backend, queue] : queues) {
        queue.responses = translate_checked(*backend, queue.requests);
        result.stats.requests += queue.requests.size();
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<CandidateTranslation> evaluated;
        for (const auto& c : per_sentence[i]) {
            // Labels outside the cascade are still validated when their span
            // was translated by the same backend.
            auto q = queues.find(&backends.for_label(c.label));
            if (q == queues.end()) continue;
            auto s = q->second.slot.find({c.span.start, c.span.len});
            if (s == q->second.slot.end()) continue;
            auto cand = evaluate_candidate(i, c, q->second.responses[s->second], config.rules, sep);
            auto& stats = result.stats.per_label[c.label];
            ++stats.validated;
            if (cand.verdict != Verdict::valid) ++stats.invalid[cand.verdict];
            evaluated.push_back(std::move(cand));
        }

        try {
            auto selection = select_final(evaluated, config.cascade);
            result.translated.sentences.emplace_back(std::move(selection.sentence));
            result.chosen[i] = selection.label;
            ++result.stats.per_label[selection.label].chosen;
        } catch (const Error&) {
            std::string raw;
            for (const auto& c : evaluated) {
                if (c.label == PositionLabel{1, 1} && c.verdict != Verdict::backend_failure) raw = c.decoded;
            }
            result.translated.sentences.emplace_back(std::move(raw));
            result.failures.push_back({doc.doc_id, i});
            ++result.stats.no_valid;
        }
        std::move(evaluated.begin(), evaluated.end(), std::back_inserter(result.candidates));
    }
    return result;
}

}  // namespace docspan
