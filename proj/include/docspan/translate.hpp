#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docspan/corpus.hpp"

namespace docspan {

/// One encoded line sent to a backend. text never contains a newline.
struct TranslationRequest {
    std::uint64_t id = 0;
    std::string text;
};

struct TranslationResponse {
    std::uint64_t id = 0;
    std::string text;
    /// Set when the backend gave up on this single request. Callers treat it
    /// like an unusable translation.
    std::optional<std::string> failure;

    bool ok() const noexcept { return !failure.has_value(); }
};

/// A sequence-to-sequence backend. Implementations must accept concurrent
/// translate_batch calls and return exactly one response per request, in
/// request order. Connection-level trouble throws
/// Error(translator_unavailable).
class Translator {
public:
    virtual ~Translator() = default;
    virtual std::vector<TranslationResponse> translate_batch(std::span<const TranslationRequest> requests) = 0;
    virtual std::string describe() const = 0;
};

/// Monotonic request ids shared by every stage of a run.
class RequestIds {
public:
    explicit RequestIds(std::uint64_t first = 0) : next_(first) {}
    std::uint64_t take() noexcept { return next_.fetch_add(1, std::memory_order_relaxed); }
    std::uint64_t peek() const noexcept { return next_.load(std::memory_order_relaxed); }

private:
    std::atomic<std::uint64_t> next_;
};

enum class MockTransform { identity, uppercase, word_reverse };

enum class FaultKind { drop_separator, word_loop, long_word, empty };

/// Deterministic fault. All configured triggers must hold for a request to be
/// faulted; with no trigger set, every request is faulted.
struct MockFault {
    FaultKind kind = FaultKind::drop_separator;
    std::optional<std::uint64_t> every;     // ids where (id + 1) % every == 0
    std::optional<std::uint64_t> hash_mod;  // content_hash(seed, text) % hash_mod == 0
    std::optional<std::size_t> parts;       // request has exactly this many sentences
    std::uint64_t seed = 0;
    std::size_t loop_count = 21;  // word-loop: extra copies of one word
    std::size_t word_len = 50;    // long-word: length of the appended word

    bool triggers(const TranslationRequest& request, std::string_view sep) const;
};

struct MockSpec {
    MockTransform transform = MockTransform::identity;
    std::optional<MockFault> fault;
};

/// FNV-1a over the seed bytes followed by the text.
std::uint64_t content_hash(std::uint64_t seed, std::string_view text) noexcept;

/// Applies the transform sentence by sentence (separator tokens untouched),
/// then the fault if it triggers. Pure function of (spec, sep, request).
std::string mock_translate(const MockSpec& spec, const SeparatorToken& sep, const TranslationRequest& request);

class MockTranslator final : public Translator {
public:
    MockTranslator(MockSpec spec, SeparatorToken sep) : spec_(std::move(spec)), sep_(std::move(sep)) {}

    std::vector<TranslationResponse> translate_batch(std::span<const TranslationRequest> requests) override;
    std::string describe() const override;

    const MockSpec& spec() const noexcept { return spec_; }

private:
    MockSpec spec_;
    SeparatorToken sep_;
};

enum class BackendKind { mock, tcp, command };

/// Parsed backend spec string:
///   mock:<transform>[?fault=<kind>&every=N&hash=M&parts=K&seed=S&n=N&len=L]
///   tcp:<host>:<port>
///   cmd:<program> [args...]
struct BackendSpec {
    BackendKind kind = BackendKind::mock;
    MockSpec mock;
    std::string host;
    std::uint16_t port = 0;
    std::vector<std::string> command;
    std::string text;  // original spec string
};

/// Throws Error(config_invalid) on malformed specs.
BackendSpec parse_backend_spec(std::string_view spec);

/// Parses just the mock part ("identity?fault=...", with or without "mock:").
MockSpec parse_mock_spec(std::string_view spec);

struct ClientOptions {
    std::size_t workers = 1;
    std::size_t retries = 2;
    std::size_t timeout_ms = 60000;
};

std::unique_ptr<Translator> make_backend(const BackendSpec& spec, const SeparatorToken& sep,
                                         const ClientOptions& options = {});

/// Sends requests through the backend and throws
/// Error(translator_unavailable) when the response count or ids do not match
/// the requests.
std::vector<TranslationResponse> translate_checked(Translator& backend, std::span<const TranslationRequest> requests);

}  // namespace docspan
