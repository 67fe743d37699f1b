#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "docspan/error.hpp"
#include "docspan/protocol.hpp"
#include "docspan/text.hpp"
#include "docspan/translate.hpp"

using namespace docspan;

namespace {

const SeparatorToken sep{"<SEP>"};

std::string mock(const std::string& spec, std::uint64_t id, const std::string& text) {
    return mock_translate(parse_mock_spec(spec), sep, {id, text});
}

std::vector<TranslationRequest> numbered(std::size_t n, std::uint64_t first = 0) {
    std::vector<TranslationRequest> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({first + i, "line " + std::to_string(i) + " a b <SEP> c d <SEP> e\tf"});
    }
    return out;
}

/// Raw client used to exercise the server framing directly.
class RawClient {
public:
    explicit RawClient(std::uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw std::runtime_error("connect");
    }
    ~RawClient() { ::close(fd_); }

    void send(const std::string& s) { ASSERT_EQ(::write(fd_, s.data(), s.size()), static_cast<ssize_t>(s.size())); }

    std::string read_line() {
        std::string line;
        char c;
        while (::read(fd_, &c, 1) == 1) {
            if (c == '\n') return line;
            line += c;
        }
        return line;
    }

private:
    int fd_;
};

std::string write_script(const std::string& name, const std::string& body) {
    auto path = std::filesystem::temp_directory_path() / ("docspan_" + name + "_" + std::to_string(::getpid()) + ".sh");
    std::ofstream(path) << body;
    return path.string();
}

}  // namespace

TEST(Mock, IdentityIsByteExact) {
    EXPECT_EQ(mock("identity", 0, "a <SEP> b"), "a <SEP> b");
    EXPECT_EQ(mock("identity", 0, "  odd   spacing<SEP>x "), "  odd   spacing<SEP>x ");
}

TEST(Mock, WordReversePerSentence) {
    EXPECT_EQ(mock("word-reverse", 0, "x y. <SEP> p q."), "y. x <SEP> q. p");
}

TEST(Mock, UppercaseSkipsSeparator) {
    SeparatorToken lower("<sep>");
    EXPECT_EQ(mock_translate(parse_mock_spec("uppercase"), lower, {0, "ab <sep> čd"}), "AB <sep> čD");
}

TEST(Mock, DropSeparatorOnlyOnTriggeredId) {
    const std::string spec = "identity?fault=drop-separator&every=8&seed=3";
    const std::string text = "a <SEP> b <SEP> c";
    for (std::uint64_t id = 0; id < 20; ++id) {
        auto out = mock(spec, id, text);
        if (id == 7 || id == 15) {
            EXPECT_EQ(text::count_occurrences(out, "<SEP>"), 1u) << id;
            EXPECT_EQ(text::split_on_separator(out, "<SEP>").size(), 2u);
        } else {
            EXPECT_EQ(out, text) << id;
        }
    }
}

TEST(Mock, FaultKinds) {
    auto loop = mock("identity?fault=word-loop", 0, "hello world");
    EXPECT_EQ(text::split_words(loop).size(), 23u);
    auto loop5 = mock("identity?fault=word-loop&n=5", 0, "hello");
    EXPECT_EQ(loop5, "hello hello hello hello hello hello");
    auto longw = mock("identity?fault=long-word&len=7", 0, "a");
    EXPECT_EQ(longw, "a xxxxxxx");
    EXPECT_EQ(mock("identity?fault=empty", 0, "a b"), "");
}

TEST(Mock, TriggersAreAnded) {
    const std::string spec = "identity?fault=empty&every=2&parts=2";
    EXPECT_EQ(mock(spec, 1, "a <SEP> b"), "");
    EXPECT_EQ(mock(spec, 1, "a"), "a");
    EXPECT_EQ(mock(spec, 0, "a <SEP> b"), "a <SEP> b");
}

TEST(Mock, HashTriggerIsReproducible) {
    const std::string spec = "identity?fault=empty&hash=3&seed=9";
    std::size_t hit = 0;
    for (int i = 0; i < 300; ++i) {
        std::string t = "sentence " + std::to_string(i);
        auto a = mock(spec, i, t);
        EXPECT_EQ(a, mock(spec, 1000 + i, t));
        EXPECT_EQ(a.empty(), content_hash(9, t) % 3 == 0);
        if (a.empty()) ++hit;
    }
    EXPECT_GT(hit, 50u);
    EXPECT_LT(hit, 150u);
}

TEST(BackendSpec, Parsing) {
    auto m = parse_backend_spec("mock:word-reverse?fault=drop-separator&every=50&seed=9");
    EXPECT_EQ(m.kind, BackendKind::mock);
    EXPECT_EQ(m.mock.transform, MockTransform::word_reverse);
    ASSERT_TRUE(m.mock.fault);
    EXPECT_EQ(*m.mock.fault->every, 50u);
    EXPECT_EQ(m.mock.fault->seed, 9u);

    auto t = parse_backend_spec("tcp:localhost:7000");
    EXPECT_EQ(t.kind, BackendKind::tcp);
    EXPECT_EQ(t.host, "localhost");
    EXPECT_EQ(t.port, 7000);

    auto c = parse_backend_spec("cmd:/bin/translator --fast");
    EXPECT_EQ(c.command, (std::vector<std::string>{"/bin/translator", "--fast"}));

    for (const char* bad : {"mock:nope", "mock:identity?every=2", "mock:identity?fault=bogus", "tcp:host",
                            "tcp:host:0", "tcp:host:99999", "cmd:", "http://x", "mock:identity?fault=empty&every=0"}) {
        try {
            parse_backend_spec(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.category(), ErrorCategory::config) << bad;
        }
    }
}

TEST(TranslateChecked, DetectsCountAndIdMismatch) {
    struct Short final : Translator {
        std::vector<TranslationResponse> translate_batch(std::span<const TranslationRequest> r) override {
            return {{r[0].id + 1, "x", std::nullopt}};
        }
        std::string describe() const override { return "short"; }
    } bad;
    auto reqs = numbered(1);
    try {
        translate_checked(bad, reqs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::translator_unavailable);
    }
    auto two = numbered(2);
    EXPECT_THROW(translate_checked(bad, two), Error);
    EXPECT_TRUE(translate_checked(bad, {}).empty());
}

TEST(Protocol, Framing) {
    EXPECT_EQ(protocol::format_frame(7, "a\tb"), "7\ta\tb\n");
    EXPECT_EQ(protocol::format_error(std::nullopt, "bad"), "ERR\t\tbad\n");
    auto f = std::get<protocol::Frame>(protocol::parse_request("18446744073709551615\tx\ty"));
    EXPECT_EQ(f.id, 18446744073709551615ULL);
    EXPECT_EQ(f.text, "x\ty");
    EXPECT_TRUE(std::holds_alternative<protocol::ErrorFrame>(protocol::parse_request("no tab")));
    EXPECT_TRUE(std::holds_alternative<protocol::ErrorFrame>(protocol::parse_request("-1\tx")));
    EXPECT_TRUE(std::holds_alternative<protocol::ErrorFrame>(protocol::parse_request("18446744073709551616\tx")));
    auto e = std::get<protocol::ErrorFrame>(protocol::parse_response("ERR\t5\tboom"));
    EXPECT_EQ(e.id, 5u);
    EXPECT_EQ(e.message, "boom");
}

TEST(Protocol, ServeStream) {
    std::istringstream in("1\tx y\ngarbage\n2\tp q <SEP> r s\n");
    std::ostringstream out;
    protocol::serve_stream(in, out, parse_mock_spec("word-reverse"), sep);
    EXPECT_EQ(out.str(), "1\ty x\nERR\t\tmalformed frame: missing TAB\n2\tq p <SEP> s r\n");
}

TEST(Protocol, TcpMatchesInProcessMock) {
    auto spec = parse_mock_spec("word-reverse?fault=drop-separator&every=7&seed=4");
    protocol::MockServer server("127.0.0.1", 0, spec, sep);
    server.start();
    ASSERT_NE(server.port(), 0);

    auto reqs = numbered(1000);
    MockTranslator local(spec, sep);
    auto expected = local.translate_batch(reqs);
    for (std::size_t workers : {1u, 4u}) {
        protocol::TcpTranslator client("127.0.0.1", server.port(), {workers, 2, 5000});
        auto got = translate_checked(client, reqs);
        ASSERT_EQ(got.size(), expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].id, expected[i].id);
            EXPECT_EQ(got[i].text, expected[i].text);
            EXPECT_TRUE(got[i].ok());
        }
    }
    server.stop();
}

TEST(Protocol, DuplicateIdsKeepMultiplicity) {
    protocol::MockServer server("127.0.0.1", 0, parse_mock_spec("identity"), sep);
    server.start();
    std::vector<TranslationRequest> reqs{{5, "a"}, {5, "b"}, {6, "c"}};
    protocol::TcpTranslator client("127.0.0.1", server.port(), {1, 0, 5000});
    auto got = client.translate_batch(reqs);
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[0].text, "a");
    EXPECT_EQ(got[1].text, "b");
    EXPECT_EQ(got[2].text, "c");
}

TEST(Protocol, MalformedFrameKeepsConnectionUsable) {
    protocol::MockServer server("127.0.0.1", 0, parse_mock_spec("identity"), sep);
    server.start();
    RawClient raw(server.port());
    raw.send("not a frame\n");
    EXPECT_EQ(raw.read_line(), "ERR\t\tmalformed frame: missing TAB");
    raw.send("x1\thello\n");
    EXPECT_TRUE(raw.read_line().starts_with("ERR\t\t"));
    raw.send("3\tstill here\n");
    EXPECT_EQ(raw.read_line(), "3\tstill here");
}

TEST(Protocol, BindFailure) {
    protocol::MockServer first("127.0.0.1", 0, {}, sep);
    try {
        protocol::MockServer second("127.0.0.1", first.port(), {}, sep);
        // SO_REUSEADDR may allow the bind on some kernels without listen; only
        // a failure must carry the right code.
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::bind_failure);
        EXPECT_EQ(e.category(), ErrorCategory::backend);
    }
}

TEST(Protocol, UnreachableServerIsUnavailable) {
    std::uint16_t port;
    {
        protocol::MockServer probe("127.0.0.1", 0, {}, sep);
        port = probe.port();
    }
    protocol::TcpTranslator client("127.0.0.1", port, {1, 1, 500});
    auto reqs = numbered(3);
    try {
        client.translate_batch(reqs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::translator_unavailable);
    }
}

TEST(Protocol, CommandBackendMatchesMock) {
    auto spec = parse_mock_spec("word-reverse?fault=drop-separator&every=3");
    protocol::CommandTranslator child({DOCSPAN_BIN, "serve-mock", "--stdio", "--mock",
                                       "word-reverse?fault=drop-separator&every=3"},
                                      {1, 2, 5000});
    MockTranslator local(spec, sep);
    auto reqs = numbered(200);
    auto got = translate_checked(child, reqs);
    auto expected = local.translate_batch(reqs);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].text, expected[i].text);
    // The child is reused for the next batch.
    auto more = numbered(5, 500);
    EXPECT_EQ(translate_checked(child, more).size(), 5u);
}

TEST(Protocol, ErrorResponsesBecomePerRequestFailures) {
    // Answers id 1 with an error every time, everything else by echo.
    auto script = write_script("err", R"(while IFS= read -r line; do
  id="${line%%	*}"
  if [ "$id" = "1" ]; then printf 'ERR\t%s\tboom\n' "$id"; else printf '%s\n' "$line"; fi
done
)");
    protocol::CommandTranslator child({"/bin/sh", script}, {1, 2, 5000});
    std::vector<TranslationRequest> reqs{{0, "a"}, {1, "b"}, {2, "c"}};
    auto got = translate_checked(child, reqs);
    EXPECT_TRUE(got[0].ok());
    EXPECT_FALSE(got[1].ok());
    EXPECT_EQ(*got[1].failure, "boom");
    EXPECT_EQ(got[2].text, "c");
    std::filesystem::remove(script);
}

TEST(Protocol, ChildExitingEarlyIsRestartedThenGivesUp) {
    // Answers one line and exits.
    auto once = write_script("once", "IFS= read -r line; printf '%s\\n' \"$line\"\n");
    protocol::CommandTranslator child({"/bin/sh", once}, {1, 5, 5000});
    std::vector<TranslationRequest> reqs{{0, "a"}, {1, "b"}, {2, "c"}};
    auto got = translate_checked(child, reqs);
    EXPECT_EQ(got[2].text, "c");

    auto dead = write_script("dead", "exit 0\n");
    protocol::CommandTranslator broken({"/bin/sh", dead}, {1, 1, 5000});
    try {
        broken.translate_batch(reqs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::translator_unavailable);
    }
    std::filesystem::remove(once);
    std::filesystem::remove(dead);
}

TEST(Protocol, MissingProgramIsUnavailable) {
    protocol::CommandTranslator child({"/nonexistent/translator"}, {1, 0, 1000});
    auto reqs = numbered(1);
    EXPECT_THROW(child.translate_batch(reqs), Error);
}
