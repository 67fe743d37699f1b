#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "docspan/translate.hpp"

// Line protocol spoken by network and child-process backends.
//
//   request / response:  <id><TAB><text><LF>
//   error response:      ERR<TAB><id or empty><TAB><message><LF>
//
// id is an unsigned 64-bit decimal. text is everything after the first TAB
// and may itself contain TABs, never LF.
namespace docspan::protocol {

struct Frame {
    std::uint64_t id;
    std::string text;
};

struct ErrorFrame {
    std::optional<std::uint64_t> id;
    std::string message;
};

std::string format_frame(std::uint64_t id, std::string_view text);
std::string format_error(std::optional<std::uint64_t> id, std::string_view message);

/// Parses a request line (without its LF). Returns ErrorFrame describing the
/// problem when the line is malformed.
std::variant<Frame, ErrorFrame> parse_request(std::string_view line);

/// Parses a response line; error frames come back as ErrorFrame.
std::variant<Frame, ErrorFrame> parse_response(std::string_view line);

/// Reply line for one request line, including the trailing LF.
std::string handle_line(std::string_view line, const MockSpec& mock, const SeparatorToken& sep);

/// Serves the protocol over a pair of streams until EOF on input.
void serve_stream(std::istream& in, std::ostream& out, const MockSpec& mock, const SeparatorToken& sep);

/// TCP server answering with the in-process mock. Port 0 picks a free port.
class MockServer {
public:
    /// Binds immediately; throws Error(bind_failure).
    MockServer(const std::string& host, std::uint16_t port, MockSpec mock, SeparatorToken sep);
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    std::uint16_t port() const noexcept;
    /// Runs until stop() on a background thread.
    void start();
    /// Runs on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Client for tcp:<host>:<port>. Each batch is split into up to `workers`
/// contiguous chunks, each sent over its own connection.
class TcpTranslator final : public Translator {
public:
    TcpTranslator(std::string host, std::uint16_t port, ClientOptions options);

    std::vector<TranslationResponse> translate_batch(std::span<const TranslationRequest> requests) override;
    std::string describe() const override;

private:
    std::vector<TranslationResponse> run_chunk(std::span<const TranslationRequest> chunk);

    std::string host_;
    std::uint16_t port_;
    ClientOptions options_;
};

/// Client for cmd:<program> [args]. The child is started lazily, reused
/// across batches and restarted if it dies.
class CommandTranslator final : public Translator {
public:
    CommandTranslator(std::vector<std::string> command, ClientOptions options);
    ~CommandTranslator() override;

    std::vector<TranslationResponse> translate_batch(std::span<const TranslationRequest> requests) override;
    std::string describe() const override;

private:
    struct Child;
    std::vector<std::string> command_;
    ClientOptions options_;
    std::mutex mutex_;
    std::unique_ptr<Child> child_;
};

}  // namespace docspan::protocol
