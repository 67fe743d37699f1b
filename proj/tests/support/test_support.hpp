#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "docspan/text.hpp"
#include "docspan/corpus.hpp"
#include "docspan/translate.hpp"

namespace docspan::fixture {

inline std::string random_word(std::mt19937_64& rng) {
    static const std::vector<std::string> pool = {
        "the", "a", "dog", "ran", "home", "přes", "řeku", "čtyři", "hrad", "Zürich", "\"quoted\"",
        "x", "data", "model", "long-hyphenated", "end.", "začátek,", "k", "město", "über",
    };
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
}

inline std::string random_sentence(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(min_words, max_words)(rng);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) s += ' ';
        s += random_word(rng);
    }
    return s;
}

inline Document random_document(std::mt19937_64& rng, std::string id, std::size_t min_sentences,
                                std::size_t max_sentences, std::size_t max_words = 25) {
    Document doc{std::move(id), {}};
    std::size_t n = std::uniform_int_distribution<std::size_t>(min_sentences, max_sentences)(rng);
    for (std::size_t i = 0; i < n; ++i) doc.sentences.emplace_back(random_sentence(rng, 1, max_words));
    return doc;
}

inline ParallelDocument random_parallel(std::mt19937_64& rng, std::string id, std::size_t max_sentences) {
    ParallelDocument doc{std::move(id), {}, {}};
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_sentences)(rng);
    for (std::size_t i = 0; i < n; ++i) {
        doc.source.emplace_back(random_sentence(rng, 1, 30));
        doc.target.emplace_back(random_sentence(rng, 1, 30));
    }
    return doc;
}

inline Document make_document(std::string id, const std::vector<std::string>& sentences) {
    Document doc{std::move(id), {}};
    for (const auto& s : sentences) doc.sentences.emplace_back(s);
    return doc;
}

/// Sentence of exactly `chars` ASCII characters made of short words.
inline std::string sentence_of_length(std::size_t chars, char fill = 'w') {
    std::string s;
    while (s.size() < chars) {
        if (!s.empty() && s.size() % 10 == 9) s += ' ';
        else s += fill;
    }
    if (!s.empty() && s.back() == ' ') s.back() = fill;
    return s;
}

/// Forwards to another translator and records every batch it sees.
class TapTranslator final : public Translator {
public:
    explicit TapTranslator(Translator& inner) : inner_(inner) {}

    std::vector<TranslationResponse> translate_batch(std::span<const TranslationRequest> requests) override {
        auto responses = inner_.translate_batch(requests);
        std::lock_guard lock(mutex_);
        batches.emplace_back(requests.begin(), requests.end());
        response_batches.push_back(responses);
        return responses;
    }
    std::string describe() const override { return "tap(" + inner_.describe() + ")"; }

    std::vector<std::vector<TranslationRequest>> batches;
    std::vector<std::vector<TranslationResponse>> response_batches;

private:
    Translator& inner_;
    std::mutex mutex_;
};

/// Answers every request with a fixed function of its text.
template <typename F>
class FunctionTranslator final : public Translator {
public:
    explicit FunctionTranslator(F f) : f_(std::move(f)) {}
    std::vector<TranslationResponse> translate_batch(std::span<const TranslationRequest> requests) override {
        std::vector<TranslationResponse> out;
        for (const auto& r : requests) out.push_back(f_(r));
        return out;
    }
    std::string describe() const override { return "function"; }

private:
    F f_;
};

}  // namespace docspan::fixture
