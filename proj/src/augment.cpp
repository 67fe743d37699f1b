#include "docspan/augment.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

#include "docspan/error.hpp"
#include "docspan/text.hpp"

namespace docspan {

void AugmentConfig::validate() const {
    if (char_budget < 1) throw Error(ErrorCode::config_invalid, "char budget must be at least 1");
    if (upsample_factor < 1) throw Error(ErrorCode::config_invalid, "upsample factor must be at least 1");
    if (length_filter && length_filter->max_units < 1) {
        throw Error(ErrorCode::config_invalid, "max units must be at least 1");
    }
}

std::vector<SequencePair> enumerate_sequences(const ParallelDocument& doc, std::size_t budget, BudgetSide side,
                                              Origin origin) {
    std::vector<SequencePair> out;
    const std::span<const Sentence> src(doc.source);
    const std::span<const Sentence> tgt(doc.target);
    const std::size_t n = doc.size();

    for (std::size_t start = 0; start < n; ++start) {
        // Span length grows monotonically with len, so stop at the first miss.
        std::size_t src_len = 0;
        std::size_t tgt_len = 0;
        for (std::size_t len = 1; start + len <= n; ++len) {
            src_len += src[start + len - 1].char_len() + (len > 1 ? 1 : 0);
            tgt_len += tgt[start + len - 1].char_len() + (len > 1 ? 1 : 0);
            std::size_t measured = side == BudgetSide::source ? src_len : std::max(src_len, tgt_len);
            if (measured > budget) break;
            out.push_back(SequencePair{doc.doc_id,
                                       start,
                                       len,
                                       {src.begin() + start, src.begin() + start + len},
                                       {tgt.begin() + start, tgt.begin() + start + len},
                                       origin});
        }
    }
    return out;
}

namespace {

std::string encode_side(const std::vector<Sentence>& sentences, const SeparatorToken& sep,
                        const std::string& doc_id) {
    for (const auto& s : sentences) {
        if (sep.occurs_in(s.text())) {
            throw Error(ErrorCode::separator_collision,
                        "document '" + doc_id + "': sentence contains separator '" + sep.str() + "'");
        }
    }
    return text::join_with_separator(sentence_texts(sentences), sep.str());
}

}  // namespace

EncodedPair encode_sequence(const SequencePair& seq, const SeparatorToken& sep) {
    return {encode_side(seq.src_sentences, sep, seq.doc_id), encode_side(seq.tgt_sentences, sep, seq.doc_id)};
}

std::vector<Sentence> decode_sequence(std::string_view line, const SeparatorToken& sep) {
    std::vector<Sentence> out;
    for (auto& part : text::split_on_separator(line, sep.str())) out.emplace_back(std::move(part));
    return out;
}

std::size_t estimate_subwords(std::span<const Sentence> sentences) noexcept {
    std::size_t words = 0;
    for (const auto& s : sentences) words += text::split_words(s.text()).size();
    return (3 * words + 1) / 2;
}

std::size_t measure_units(std::span<const Sentence> sentences, UnitMode mode) noexcept {
    return mode == UnitMode::chars ? span_char_length(sentences) : estimate_subwords(sentences);
}

std::vector<SequencePair> filter_by_length(std::vector<SequencePair> pairs, std::size_t max_units, UnitMode mode) {
    std::erase_if(pairs, [&](const SequencePair& p) {
        return std::max(measure_units(p.src_sentences, mode), measure_units(p.tgt_sentences, mode)) > max_units;
    });
    return pairs;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    // Largest multiple of bound representable; draws above it are rejected.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return draw % bound;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<OccurrenceCounts> upsampling_report(std::span<const ParallelDocument> docs, std::size_t budget,
                                                BudgetSide side) {
    std::vector<OccurrenceCounts> out;
    out.reserve(docs.size());
    for (const auto& doc : docs) {
        OccurrenceCounts counts{doc.doc_id, std::vector<std::size_t>(doc.size(), 0)};
        for (const auto& seq : enumerate_sequences(doc, budget, side)) {
            for (std::size_t i = seq.start; i < seq.start + seq.len; ++i) ++counts.counts[i];
        }
        out.push_back(std::move(counts));
    }
    return out;
}

std::vector<SequencePair> build_stream(std::span<const ParallelDocument> docs, const AugmentConfig& config,
                                       Origin origin, AugmentCounts* counts) {
    config.validate();
    std::vector<SequencePair> pairs;
    for (const auto& doc : docs) {
        auto seqs = enumerate_sequences(doc, config.char_budget, config.budget_side, origin);
        std::move(seqs.begin(), seqs.end(), std::back_inserter(pairs));
    }
    const std::size_t enumerated = pairs.size();
    if (config.length_filter) {
        pairs = filter_by_length(std::move(pairs), config.length_filter->max_units, config.length_filter->unit_mode);
    }
    const std::size_t kept = pairs.size();

    std::stable_sort(pairs.begin(), pairs.end(), [](const SequencePair& a, const SequencePair& b) {
        return std::tie(a.doc_id, a.start, a.len) < std::tie(b.doc_id, b.start, b.len);
    });
    pairs = upsample(pairs, config.upsample_factor);
    auto stream = origin == Origin::authentic ? 0U : 1U;
    pairs = shuffle_corpus(std::move(pairs), stream_seed(config.seed, stream));

    if (counts) {
        counts->enumerated = enumerated;
        counts->length_filtered = enumerated - kept;
        counts->emitted = pairs.size();
    }
    return pairs;
}

AugmentedCorpus build_augmented_corpus(std::span<const ParallelDocument> authentic,
                                       std::span<const ParallelDocument> synthetic, const AugmentConfig& config) {
    return {build_stream(authentic, config, Origin::authentic), build_stream(synthetic, config, Origin::synthetic)};
}

}  // namespace docspan
