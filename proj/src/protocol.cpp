#include "docspan/protocol.hpp"

#include <charconv>
#include <csignal>
#include <deque>
#include <istream>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <sys/socket.h>
#include <sys/time.h>

#include <boost/asio.hpp>
#include <boost/process.hpp>
#include <spdlog/spdlog.h>

#include "docspan/error.hpp"

namespace docspan::protocol {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

std::optional<std::uint64_t> parse_id(std::string_view s) {
    if (s.empty() || s.size() > 20) return std::nullopt;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

std::string format_frame(std::uint64_t id, std::string_view text) {
    std::string out = std::to_string(id);
    out += '\t';
    out += text;
    out += '\n';
    return out;
}

std::string format_error(std::optional<std::uint64_t> id, std::string_view message) {
    std::string out = "ERR\t";
    if (id) out += std::to_string(*id);
    out += '\t';
    out += message;
    out += '\n';
    return out;
}

std::variant<Frame, ErrorFrame> parse_request(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) return ErrorFrame{std::nullopt, "malformed frame: missing TAB"};
    auto id = parse_id(line.substr(0, tab));
    if (!id) return ErrorFrame{std::nullopt, "malformed frame: id is not a 64-bit decimal"};
    return Frame{*id, std::string(line.substr(tab + 1))};
}

std::variant<Frame, ErrorFrame> parse_response(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.starts_with("ERR\t")) {
        std::string_view rest = line.substr(4);
        auto tab = rest.find('\t');
        ErrorFrame err;
        err.id = parse_id(rest.substr(0, tab));
        err.message = tab == std::string_view::npos ? std::string(rest) : std::string(rest.substr(tab + 1));
        return err;
    }
    return parse_request(line);
}

std::string handle_line(std::string_view line, const MockSpec& mock, const SeparatorToken& sep) {
    auto parsed = parse_request(line);
    if (auto* err = std::get_if<ErrorFrame>(&parsed)) return format_error(err->id, err->message);
    auto& frame = std::get<Frame>(parsed);
    return format_frame(frame.id, mock_translate(mock, sep, TranslationRequest{frame.id, std::move(frame.text)}));
}

void serve_stream(std::istream& in, std::ostream& out, const MockSpec& mock, const SeparatorToken& sep) {
    std::string line;
    while (std::getline(in, line)) {
        out << handle_line(line, mock, sep);
        out.flush();
    }
}

// --- server -----------------------------------------------------------------

namespace {

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(tcp::socket socket, const MockSpec& mock, const SeparatorToken& sep)
        : socket_(std::move(socket)), mock_(mock), sep_(sep) {}

    void start() { read(); }

private:
    void read() {
        auto self = shared_from_this();
        asio::async_read_until(socket_, buffer_, '\n', [self](boost::system::error_code ec, std::size_t) {
            if (ec) return;
            self->answer();
        });
    }

    void answer() {
        // Answer every complete line currently buffered in one write.
        outgoing_.clear();
        std::istream is(&buffer_);
        std::string line;
        while (buffer_.size() > 0) {
            auto data = buffer_.data();
            std::string_view view(static_cast<const char*>(data.data()), data.size());
            if (view.find('\n') == std::string_view::npos) break;
            std::getline(is, line);
            outgoing_ += handle_line(line, mock_, sep_);
        }
        auto self = shared_from_this();
        asio::async_write(socket_, asio::buffer(outgoing_), [self](boost::system::error_code ec, std::size_t) {
            if (ec) return;
            self->read();
        });
    }

    tcp::socket socket_;
    const MockSpec& mock_;
    const SeparatorToken& sep_;
    asio::streambuf buffer_;
    std::string outgoing_;
};

}  // namespace

struct MockServer::Impl {
    Impl(MockSpec m, SeparatorToken s) : mock(std::move(m)), sep(std::move(s)) {}

    MockSpec mock;
    SeparatorToken sep;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::thread thread;

    void accept() {
        acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<Session>(std::move(socket), mock, sep)->start();
            accept();
        });
    }
};

MockServer::MockServer(const std::string& host, std::uint16_t port, MockSpec mock, SeparatorToken sep)
    : impl_(std::make_unique<Impl>(std::move(mock), std::move(sep))) {
    try {
        tcp::resolver resolver(impl_->io);
        auto endpoints = resolver.resolve(host, std::to_string(port), tcp::resolver::passive);
        tcp::endpoint endpoint = endpoints.begin()->endpoint();
        impl_->acceptor.open(endpoint.protocol());
        impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
        impl_->acceptor.bind(endpoint);
        impl_->acceptor.listen();
    } catch (const boost::system::system_error& e) {
        throw Error(ErrorCode::bind_failure, "cannot listen on " + host + ":" + std::to_string(port) + ": " + e.what());
    }
    impl_->accept();
}

MockServer::~MockServer() { stop(); }

std::uint16_t MockServer::port() const noexcept { return impl_->acceptor.local_endpoint().port(); }

void MockServer::start() {
    impl_->thread = std::thread([this] { impl_->io.run(); });
}

void MockServer::run() { impl_->io.run(); }

void MockServer::stop() {
    impl_->io.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

// --- tcp client -------------------------------------------------------------

namespace {

struct ChunkState {
    std::span<const TranslationRequest> requests;
    std::vector<TranslationResponse> responses;
    std::vector<bool> done;
    std::vector<std::size_t> failures;
    std::unordered_map<std::uint64_t, std::deque<std::size_t>> waiting;

    explicit ChunkState(std::span<const TranslationRequest> reqs)
        : requests(reqs), responses(reqs.size()), done(reqs.size(), false), failures(reqs.size(), 0) {}

    std::vector<std::size_t> pending() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < done.size(); ++i) {
            if (!done[i]) out.push_back(i);
        }
        return out;
    }
};

/// Applies one response line. Returns false when the line matches no
/// outstanding request.
bool absorb(ChunkState& state, std::string_view line, std::size_t retries) {
    auto parsed = parse_response(line);
    std::optional<std::uint64_t> id;
    if (auto* frame = std::get_if<Frame>(&parsed)) id = frame->id;
    else id = std::get<ErrorFrame>(parsed).id;
    if (!id) return false;
    auto it = state.waiting.find(*id);
    if (it == state.waiting.end() || it->second.empty()) return false;
    std::size_t index = it->second.front();
    it->second.pop_front();

    if (auto* frame = std::get_if<Frame>(&parsed)) {
        state.responses[index] = {frame->id, std::move(frame->text), std::nullopt};
        state.done[index] = true;
        return true;
    }
    const auto& err = std::get<ErrorFrame>(parsed);
    if (++state.failures[index] > retries) {
        spdlog::warn("request {} failed after {} attempts: {}", *id, state.failures[index], err.message);
        state.responses[index] = {*id, {}, err.message};
        state.done[index] = true;
    } else {
        spdlog::info("request {} failed ({}), retrying", *id, err.message);
    }
    return true;
}

void set_timeout(tcp::socket& socket, std::size_t timeout_ms) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout_ms / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout_ms % 1000) * 1000);
    ::setsockopt(socket.native_handle(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(socket.native_handle(), SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

}  // namespace

TcpTranslator::TcpTranslator(std::string host, std::uint16_t port, ClientOptions options)
    : host_(std::move(host)), port_(port), options_(options) {}

std::string TcpTranslator::describe() const { return "tcp:" + host_ + ":" + std::to_string(port_); }

std::vector<TranslationResponse> TcpTranslator::run_chunk(std::span<const TranslationRequest> chunk) {
    ChunkState state(chunk);
    std::size_t connection_failures = 0;

    for (auto pending = state.pending(); !pending.empty(); pending = state.pending()) {
        state.waiting.clear();
        std::string payload;
        for (std::size_t i : pending) {
            state.waiting[chunk[i].id].push_back(i);
            payload += format_frame(chunk[i].id, chunk[i].text);
        }
        try {
            asio::io_context io;
            tcp::socket socket(io);
            tcp::resolver resolver(io);
            asio::connect(socket, resolver.resolve(host_, std::to_string(port_)));
            set_timeout(socket, options_.timeout_ms);

            // Writer runs alongside the reader so a server that answers
            // while still reading cannot deadlock on full buffers.
            boost::system::error_code write_ec;
            std::thread writer([&] { asio::write(socket, asio::buffer(payload), write_ec); });
            asio::streambuf buffer;
            std::istream is(&buffer);
            std::string line;
            std::size_t answered = 0;
            boost::system::error_code read_ec;
            while (answered < pending.size()) {
                asio::read_until(socket, buffer, '\n', read_ec);
                if (read_ec) break;
                std::getline(is, line);
                if (absorb(state, line, options_.retries)) ++answered;
                else spdlog::warn("{}: ignoring unmatched response line", describe());
            }
            if (read_ec) socket.close();
            writer.join();
            if (read_ec) throw boost::system::system_error(read_ec);
            if (write_ec) throw boost::system::system_error(write_ec);
        } catch (const boost::system::system_error& e) {
            if (++connection_failures > options_.retries) {
                throw Error(ErrorCode::translator_unavailable, describe() + ": " + e.what());
            }
            spdlog::warn("{}: {} (retry {}/{})", describe(), e.what(), connection_failures, options_.retries);
            std::this_thread::sleep_for(std::chrono::milliseconds(50 * connection_failures));
        }
    }
    return std::move(state.responses);
}

std::vector<TranslationResponse> TcpTranslator::translate_batch(std::span<const TranslationRequest> requests) {
    if (requests.empty()) return {};
    std::size_t workers = std::max<std::size_t>(1, std::min(options_.workers, requests.size()));
    if (workers == 1) return run_chunk(requests);

    std::vector<std::vector<TranslationResponse>> parts(workers);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    std::size_t per = (requests.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t begin = std::min(requests.size(), w * per);
        std::size_t end = std::min(requests.size(), begin + per);
        threads.emplace_back([&, w, begin, end] {
            try {
                parts[w] = run_chunk(requests.subspan(begin, end - begin));
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<TranslationResponse> out;
    out.reserve(requests.size());
    for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
    return out;
}

// --- child process client ---------------------------------------------------

namespace bp = boost::process;

struct CommandTranslator::Child {
    bp::opstream in;
    bp::ipstream out;
    bp::child process;

    explicit Child(const std::vector<std::string>& command)
        : process(bp::exe = command.front(),
                  bp::args = std::vector<std::string>(command.begin() + 1, command.end()),
                  bp::std_in < in, bp::std_out > out) {}

    ~Child() {
        in.pipe().close();
        std::error_code ec;
        for (int i = 0; i < 200 && process.running(ec); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        if (process.running(ec)) process.terminate(ec);
        if (process.valid()) process.wait(ec);
    }
};

CommandTranslator::CommandTranslator(std::vector<std::string> command, ClientOptions options)
    : command_(std::move(command)), options_(options) {
    // A child that dies mid-batch must surface as a write error, not kill us.
    std::signal(SIGPIPE, SIG_IGN);
}

CommandTranslator::~CommandTranslator() = default;

std::string CommandTranslator::describe() const { return "cmd:" + command_.front(); }

std::vector<TranslationResponse> CommandTranslator::translate_batch(std::span<const TranslationRequest> requests) {
    std::lock_guard lock(mutex_);
    ChunkState state(requests);
    std::size_t restarts = 0;

    for (auto pending = state.pending(); !pending.empty(); pending = state.pending()) {
        try {
            if (!child_ || !child_->process.running()) child_ = std::make_unique<Child>(command_);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::translator_unavailable, describe() + ": " + e.what());
        }
        state.waiting.clear();
        for (std::size_t i : pending) state.waiting[requests[i].id].push_back(i);

        std::thread writer([&] {
            for (std::size_t i : pending) child_->in << format_frame(requests[i].id, requests[i].text);
            child_->in.flush();
        });
        std::size_t answered = 0;
        std::string line;
        while (answered < pending.size() && std::getline(child_->out, line)) {
            if (absorb(state, line, options_.retries)) ++answered;
        }
        writer.join();
        if (answered < pending.size()) {
            child_.reset();
            if (++restarts > options_.retries) {
                throw Error(ErrorCode::translator_unavailable, describe() + ": child exited before answering");
            }
            spdlog::warn("{}: child exited early, restarting ({}/{})", describe(), restarts, options_.retries);
        }
    }
    return std::move(state.responses);
}

}  // namespace docspan::protocol
