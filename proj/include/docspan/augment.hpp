#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "docspan/corpus.hpp"

namespace docspan {

enum class Origin { authentic, synthetic };

/// Consecutive sentences [start, start + len) of one parallel document.
struct SequencePair {
    std::string doc_id;
    std::size_t start = 0;
    std::size_t len = 0;
    std::vector<Sentence> src_sentences;
    std::vector<Sentence> tgt_sentences;
    Origin origin = Origin::authentic;

    friend bool operator==(const SequencePair&, const SequencePair&) = default;
};

/// Which side the character budget is checked on.
enum class BudgetSide { source, max_of_both };

enum class UnitMode { chars, est_subwords };

struct LengthFilter {
    std::size_t max_units = 200;
    UnitMode unit_mode = UnitMode::est_subwords;
};

struct AugmentConfig {
    std::size_t char_budget = 1000;
    SeparatorToken separator{std::string(default_separator)};
    std::uint64_t seed = 0;
    std::size_t upsample_factor = 1;
    BudgetSide budget_side = BudgetSide::source;
    std::optional<LengthFilter> length_filter;

    /// Throws Error(config_invalid) on char_budget == 0 or upsample_factor == 0.
    void validate() const;
};

/// All spans whose measured length fits the budget, in (start, len) order.
std::vector<SequencePair> enumerate_sequences(const ParallelDocument& doc, std::size_t budget,
                                              BudgetSide side = BudgetSide::source,
                                              Origin origin = Origin::authentic);

struct EncodedPair {
    std::string source;
    std::string target;
};

/// Throws SeparatorCollision if any sentence contains the separator.
EncodedPair encode_sequence(const SequencePair& seq, const SeparatorToken& sep);

/// Splits one encoded line back into sentences.
std::vector<Sentence> decode_sequence(std::string_view line, const SeparatorToken& sep);

/// ceil(1.5 * whitespace words); the average word is 1.5 subwords.
std::size_t estimate_subwords(std::span<const Sentence> sentences) noexcept;

std::size_t measure_units(std::span<const Sentence> sentences, UnitMode mode) noexcept;

/// Keeps pairs whose longer side measures at most max_units.
std::vector<SequencePair> filter_by_length(std::vector<SequencePair> pairs, std::size_t max_units, UnitMode mode);

template <typename T>
std::vector<T> upsample(const std::vector<T>& items, std::size_t factor) {
    std::vector<T> out;
    out.reserve(items.size() * factor);
    for (std::size_t k = 0; k < factor; ++k) out.insert(out.end(), items.begin(), items.end());
    return out;
}

/// Uniform integer in [0, bound) from a 64-bit engine by rejection sampling.
/// Unlike std::uniform_int_distribution the result is identical on every
/// standard library.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// Fisher-Yates driven by std::mt19937_64(seed) and uniform_below: position
/// i (from the back) swaps with uniform_below(i + 1).
template <typename T>
std::vector<T> shuffle_corpus(std::vector<T> items, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(uniform_below(rng, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
    return items;
}

/// Independent seed per output stream derived with SplitMix64.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// For every sentence of every document, how many enumerated spans contain it.
struct OccurrenceCounts {
    std::string doc_id;
    std::vector<std::size_t> counts;
};

std::vector<OccurrenceCounts> upsampling_report(std::span<const ParallelDocument> docs, std::size_t budget,
                                                BudgetSide side = BudgetSide::source);

struct AugmentedCorpus {
    std::vector<SequencePair> authentic;
    std::vector<SequencePair> synthetic;
};

struct AugmentCounts {
    std::size_t enumerated = 0;
    std::size_t length_filtered = 0;
    std::size_t emitted = 0;
};

/// Full pipeline for one stream: enumerate every document, apply the length
/// filter, sort by (doc_id, start, len), upsample, then shuffle.
std::vector<SequencePair> build_stream(std::span<const ParallelDocument> docs, const AugmentConfig& config,
                                       Origin origin, AugmentCounts* counts = nullptr);

/// Authentic and synthetic streams are built and shuffled separately.
AugmentedCorpus build_augmented_corpus(std::span<const ParallelDocument> authentic,
                                       std::span<const ParallelDocument> synthetic, const AugmentConfig& config);

}  // namespace docspan
