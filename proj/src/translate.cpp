#include "docspan/translate.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>

#include "docspan/error.hpp"
#include "docspan/protocol.hpp"
#include "docspan/text.hpp"

namespace docspan {

namespace {

std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string transform_sentence(MockTransform transform, std::string_view sentence) {
    switch (transform) {
    case MockTransform::identity:
        return std::string(sentence);
    case MockTransform::uppercase: {
        std::string out(sentence);
        for (char& c : out) {
            if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
        return out;
    }
    case MockTransform::word_reverse: {
        auto words = text::split_words(sentence);
        std::string out;
        for (auto it = words.rbegin(); it != words.rend(); ++it) {
            if (!out.empty()) out += ' ';
            out += *it;
        }
        return out;
    }
    }
    return std::string(sentence);
}

void drop_separator(std::string& out, std::string_view sep, std::uint64_t pick) {
    std::size_t count = text::count_occurrences(out, sep);
    if (count == 0) return;
    std::size_t target = static_cast<std::size_t>(pick % count);
    std::size_t pos = out.find(sep);
    for (std::size_t k = 0; k < target; ++k) pos = out.find(sep, pos + sep.size());
    std::size_t begin = pos;
    std::size_t end = pos + sep.size();
    if (begin > 0 && out[begin - 1] == ' ') {
        --begin;
    } else if (end < out.size() && out[end] == ' ') {
        ++end;
    }
    out.erase(begin, end - begin);
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw Error(ErrorCode::config_invalid,
                    "backend parameter '" + std::string(key) + "' expects an integer, got '" + std::string(value) + "'");
    }
    return v;
}

}  // namespace

std::uint64_t content_hash(std::uint64_t seed, std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](unsigned char byte) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    };
    for (int i = 0; i < 8; ++i) feed(static_cast<unsigned char>(seed >> (8 * i)));
    for (char c : text) feed(static_cast<unsigned char>(c));
    return h;
}

bool MockFault::triggers(const TranslationRequest& request, std::string_view sep) const {
    if (every && (*every == 0 || (request.id + 1) % *every != 0)) return false;
    if (hash_mod && (*hash_mod == 0 || content_hash(seed, request.text) % *hash_mod != 0)) return false;
    if (parts && text::count_occurrences(request.text, sep) + 1 != *parts) return false;
    return true;
}

std::string mock_translate(const MockSpec& spec, const SeparatorToken& sep, const TranslationRequest& request) {
    std::string out;
    if (spec.transform == MockTransform::identity) {
        out = request.text;
    } else if (spec.transform == MockTransform::uppercase) {
        // Uppercase everything outside separator tokens; layout is kept.
        out = request.text;
        std::size_t pos = 0;
        while (pos < out.size()) {
            std::size_t hit = out.find(sep.str(), pos);
            std::size_t end = hit == std::string::npos ? out.size() : hit;
            std::string upper = transform_sentence(MockTransform::uppercase, std::string_view(out).substr(pos, end - pos));
            out.replace(pos, end - pos, upper);
            pos = hit == std::string::npos ? out.size() : hit + sep.str().size();
        }
    } else {
        std::vector<std::string> parts;
        for (const auto& part : text::split_on_separator(request.text, sep.str())) {
            parts.push_back(transform_sentence(spec.transform, part));
        }
        out = text::join_with_separator(parts, sep.str());
    }

    if (!spec.fault || !spec.fault->triggers(request, sep.str())) return out;

    const MockFault& fault = *spec.fault;
    switch (fault.kind) {
    case FaultKind::drop_separator:
        drop_separator(out, sep.str(), mix(fault.seed ^ mix(request.id)));
        break;
    case FaultKind::word_loop: {
        auto words = text::split_words(out);
        std::string word = words.empty() || words.front() == sep.str() ? std::string("loop") : std::string(words.front());
        for (std::size_t k = 0; k < fault.loop_count; ++k) out += " " + word;
        break;
    }
    case FaultKind::long_word:
        out += " " + std::string(fault.word_len, 'x');
        break;
    case FaultKind::empty:
        out.clear();
        break;
    }
    return out;
}

std::vector<TranslationResponse> MockTranslator::translate_batch(std::span<const TranslationRequest> requests) {
    std::vector<TranslationResponse> out;
    out.reserve(requests.size());
    for (const auto& r : requests) out.push_back({r.id, mock_translate(spec_, sep_, r), std::nullopt});
    return out;
}

std::string MockTranslator::describe() const { return "mock"; }

MockSpec parse_mock_spec(std::string_view spec) {
    if (spec.starts_with("mock:")) spec.remove_prefix(5);
    auto q = spec.find('?');
    std::string_view name = spec.substr(0, q);
    MockSpec out;
    if (name == "identity") {
        out.transform = MockTransform::identity;
    } else if (name == "uppercase") {
        out.transform = MockTransform::uppercase;
    } else if (name == "word-reverse") {
        out.transform = MockTransform::word_reverse;
    } else {
        throw Error(ErrorCode::config_invalid, "unknown mock transform '" + std::string(name) + "'");
    }
    if (q == std::string_view::npos) return out;

    MockFault fault;
    bool has_kind = false;
    std::string_view query = spec.substr(q + 1);
    while (!query.empty()) {
        auto amp = query.find('&');
        std::string_view item = query.substr(0, amp);
        query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
        auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::config_invalid, "backend parameter '" + std::string(item) + "' has no value");
        }
        std::string_view key = item.substr(0, eq);
        std::string_view value = item.substr(eq + 1);
        if (key == "fault") {
            has_kind = true;
            if (value == "drop-separator") fault.kind = FaultKind::drop_separator;
            else if (value == "word-loop") fault.kind = FaultKind::word_loop;
            else if (value == "long-word") fault.kind = FaultKind::long_word;
            else if (value == "empty") fault.kind = FaultKind::empty;
            else throw Error(ErrorCode::config_invalid, "unknown fault kind '" + std::string(value) + "'");
        } else if (key == "every") {
            fault.every = parse_u64(key, value);
        } else if (key == "hash") {
            fault.hash_mod = parse_u64(key, value);
        } else if (key == "parts") {
            fault.parts = parse_u64(key, value);
        } else if (key == "seed") {
            fault.seed = parse_u64(key, value);
        } else if (key == "n") {
            fault.loop_count = parse_u64(key, value);
        } else if (key == "len") {
            fault.word_len = parse_u64(key, value);
        } else {
            throw Error(ErrorCode::config_invalid, "unknown backend parameter '" + std::string(key) + "'");
        }
    }
    if (!has_kind) throw Error(ErrorCode::config_invalid, "mock parameters given without fault=<kind>");
    if ((fault.every && *fault.every == 0) || (fault.hash_mod && *fault.hash_mod == 0)) {
        throw Error(ErrorCode::config_invalid, "fault trigger moduli must be positive");
    }
    out.fault = fault;
    return out;
}

BackendSpec parse_backend_spec(std::string_view spec) {
    BackendSpec out;
    out.text = std::string(spec);
    if (spec.starts_with("mock:")) {
        out.kind = BackendKind::mock;
        out.mock = parse_mock_spec(spec);
    } else if (spec.starts_with("tcp:")) {
        out.kind = BackendKind::tcp;
        std::string_view rest = spec.substr(4);
        auto colon = rest.rfind(':');
        if (colon == std::string_view::npos || colon == 0) {
            throw Error(ErrorCode::config_invalid, "tcp backend expects tcp:<host>:<port>");
        }
        out.host = std::string(rest.substr(0, colon));
        auto port = parse_u64("port", rest.substr(colon + 1));
        if (port == 0 || port > 65535) throw Error(ErrorCode::config_invalid, "tcp port out of range");
        out.port = static_cast<std::uint16_t>(port);
    } else if (spec.starts_with("cmd:")) {
        out.kind = BackendKind::command;
        for (auto word : text::split_words(spec.substr(4))) out.command.emplace_back(word);
        if (out.command.empty()) throw Error(ErrorCode::config_invalid, "cmd backend needs a program path");
    } else {
        throw Error(ErrorCode::config_invalid, "unknown backend spec '" + std::string(spec) + "'");
    }
    return out;
}

std::unique_ptr<Translator> make_backend(const BackendSpec& spec, const SeparatorToken& sep,
                                         const ClientOptions& options) {
    switch (spec.kind) {
    case BackendKind::mock:
        return std::make_unique<MockTranslator>(spec.mock, sep);
    case BackendKind::tcp:
        return std::make_unique<protocol::TcpTranslator>(spec.host, spec.port, options);
    case BackendKind::command:
        return std::make_unique<protocol::CommandTranslator>(spec.command, options);
    }
    throw Error(ErrorCode::config_invalid, "unsupported backend");
}

std::vector<TranslationResponse> translate_checked(Translator& backend, std::span<const TranslationRequest> requests) {
    if (requests.empty()) return {};
    auto responses = backend.translate_batch(requests);
    if (responses.size() != requests.size()) {
        throw Error(ErrorCode::translator_unavailable,
                    backend.describe() + " returned " + std::to_string(responses.size()) + " responses for " +
                        std::to_string(requests.size()) + " requests");
    }
    for (std::size_t i = 0; i < requests.size(); ++i) {
        if (responses[i].id != requests[i].id) {
            throw Error(ErrorCode::translator_unavailable,
                        backend.describe() + " answered id " + std::to_string(responses[i].id) + " for request " +
                            std::to_string(requests[i].id));
        }
    }
    return responses;
}

}  // namespace docspan
