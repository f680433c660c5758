#include "layl/bridge.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <sstream>

#include "json.hpp"
#include "layl/errors.hpp"

namespace layl {

namespace {
const char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const uint8_t* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        uint32_t chunk = uint32_t(data[i]) << 16;
        if (i + 1 < len) chunk |= uint32_t(data[i + 1]) << 8;
        if (i + 2 < len) chunk |= uint32_t(data[i + 2]);
        out.push_back(kB64Chars[(chunk >> 18) & 63]);
        out.push_back(kB64Chars[(chunk >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64Chars[(chunk >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64Chars[chunk & 63] : '=');
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) throw BridgeProtocolError("base64 payload length not a multiple of 4");
    std::vector<uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            char c = text[i + size_t(j)];
            if (c == '=') {
                vals[j] = 0;
                ++pad;
            } else {
                vals[j] = value_of(c);
                if (vals[j] < 0 || pad > 0)
                    throw BridgeProtocolError("invalid base64 character in payload");
            }
        }
        uint32_t chunk = (uint32_t(vals[0]) << 18) | (uint32_t(vals[1]) << 12) |
                         (uint32_t(vals[2]) << 6) | uint32_t(vals[3]);
        out.push_back(uint8_t((chunk >> 16) & 0xff));
        if (pad < 2) out.push_back(uint8_t((chunk >> 8) & 0xff));
        if (pad < 1) out.push_back(uint8_t(chunk & 0xff));
    }
    return out;
}

std::string image_to_base64(const std::vector<double>& image) {
    std::vector<uint8_t> bytes(image.size() * 4);
    for (size_t i = 0; i < image.size(); ++i) {
        float f = float(image[i]);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        bytes[4 * i] = uint8_t(bits & 0xff);
        bytes[4 * i + 1] = uint8_t((bits >> 8) & 0xff);
        bytes[4 * i + 2] = uint8_t((bits >> 16) & 0xff);
        bytes[4 * i + 3] = uint8_t((bits >> 24) & 0xff);
    }
    return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> base64_to_image(const std::string& text) {
    std::vector<uint8_t> bytes = base64_decode(text);
    if (bytes.size() % 4 != 0) throw BridgeProtocolError("float payload not a multiple of 4 bytes");
    std::vector<double> out(bytes.size() / 4);
    for (size_t i = 0; i < out.size(); ++i) {
        uint32_t bits = uint32_t(bytes[4 * i]) | (uint32_t(bytes[4 * i + 1]) << 8) |
                        (uint32_t(bytes[4 * i + 2]) << 16) | (uint32_t(bytes[4 * i + 3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        out[i] = double(f);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transport

class BridgeGuidance::Transport {
public:
    virtual ~Transport() = default;
    virtual void send_line(const std::string& line) = 0;
    // Returns false on timeout; throws BridgeProtocolError on broken peers.
    virtual bool recv_line(std::string& line, double timeout_seconds) = 0;

protected:
    bool read_buffered_line(std::string& line) {
        size_t nl = buffer_.find('\n');
        if (nl == std::string::npos) return false;
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return true;
    }

    std::string buffer_;
};

namespace {

class FdTransport : public BridgeGuidance::Transport {
public:
    FdTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

    ~FdTransport() override {
        if (read_fd_ >= 0) ::close(read_fd_);
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    }

    void send_line(const std::string& line) override {
        std::string framed = line + "\n";
        size_t sent = 0;
        while (sent < framed.size()) {
            ssize_t n = ::write(write_fd_, framed.data() + sent, framed.size() - sent);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw BridgeProtocolError("bridge write failed: " + std::string(strerror(errno)));
            }
            sent += size_t(n);
        }
    }

    bool recv_line(std::string& line, double timeout_seconds) override {
        if (read_buffered_line(line)) return true;
        for (;;) {
            struct pollfd pfd{read_fd_, POLLIN, 0};
            int timeout_ms = int(timeout_seconds * 1000.0);
            int rv = ::poll(&pfd, 1, timeout_ms);
            if (rv < 0) {
                if (errno == EINTR) continue;
                throw BridgeProtocolError("bridge poll failed: " + std::string(strerror(errno)));
            }
            if (rv == 0) return false;  // timeout
            char chunk[4096];
            ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
            if (n < 0) {
                if (errno == EINTR) continue;
                throw BridgeProtocolError("bridge read failed: " + std::string(strerror(errno)));
            }
            if (n == 0) throw BridgeProtocolError("bridge peer closed the connection");
            buffer_.append(chunk, size_t(n));
            if (read_buffered_line(line)) return true;
        }
    }

private:
    int read_fd_;
    int write_fd_;
};

class SubprocessTransport : public FdTransport {
public:
    SubprocessTransport(int read_fd, int write_fd, pid_t pid)
        : FdTransport(read_fd, write_fd), pid_(pid) {}

    ~SubprocessTransport() override {
        if (pid_ > 0) {
            ::kill(pid_, SIGTERM);
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
    }

private:
    pid_t pid_;
};

std::unique_ptr<BridgeGuidance::Transport> connect_tcp(const std::string& spec) {
    size_t colon = spec.rfind(':');
    if (colon == std::string::npos)
        throw ConfigError("bridge endpoint must be host:port or stdio:<command>");
    std::string host = spec.substr(0, colon);
    std::string port = spec.substr(colon + 1);

    struct addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    struct addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0)
        throw BridgeProtocolError("bridge resolve failed for " + spec + ": " + gai_strerror(rc));

    int fd = -1;
    for (struct addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw BridgeProtocolError("bridge could not connect to " + spec);
    return std::make_unique<FdTransport>(fd, fd);
}

std::unique_ptr<BridgeGuidance::Transport> spawn_subprocess(const std::string& command) {
    std::vector<std::string> args;
    std::istringstream is(command);
    for (std::string tok; is >> tok;) args.push_back(tok);
    if (args.empty()) throw ConfigError("bridge stdio endpoint has an empty command");

    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
        throw BridgeProtocolError("bridge pipe creation failed");

    pid_t pid = ::fork();
    if (pid < 0) throw BridgeProtocolError("bridge fork failed");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        ::execvp(argv[0], argv.data());
        _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::make_unique<SubprocessTransport>(from_child[0], to_child[1], pid);
}

}  // namespace

BridgeGuidance::BridgeGuidance(BridgeConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.timeout_seconds <= 0.0) throw ConfigError("bridge timeout must be positive");
    if (cfg_.endpoint.rfind("stdio:", 0) == 0)
        transport_ = spawn_subprocess(cfg_.endpoint.substr(6));
    else
        transport_ = connect_tcp(cfg_.endpoint);
}

BridgeGuidance::~BridgeGuidance() = default;

std::string BridgeGuidance::roundtrip(const std::string& request_line, uint64_t id) {
    int attempts = 0;
    for (;;) {
        transport_->send_line(request_line);
        std::string line;
        for (;;) {
            if (!transport_->recv_line(line, cfg_.timeout_seconds)) {
                line.clear();
                break;  // timeout
            }
            nlohmann::json reply;
            try {
                reply = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw BridgeProtocolError(std::string("bridge response is not valid JSON: ") +
                                          e.what());
            }
            if (!reply.contains("id") || !reply["id"].is_number_unsigned())
                throw BridgeProtocolError("bridge response is missing a numeric id");
            uint64_t got = reply["id"].get<uint64_t>();
            if (got == id) return line;
            if (got < id) continue;  // stale reply from an earlier attempt
            throw BridgeProtocolError("bridge response id does not match any request");
        }
        if (++attempts > cfg_.max_retries)
            throw BridgeTimeoutError("bridge request timed out after " +
                                     std::to_string(attempts) + " attempts");
    }
}

std::vector<double> BridgeGuidance::denoise(const std::vector<double>& z_t, int width, int height,
                                            double t, const std::string& prompt,
                                            double cfg_strength) {
    if (int64_t(z_t.size()) != int64_t(width) * height * 3)
        throw ContractError("bridge denoise: image size does not match dimensions");
    uint64_t id = next_id_++;
    nlohmann::json req;
    req["id"] = id;
    req["kind"] = "denoise";
    req["width"] = width;
    req["height"] = height;
    req["rgb"] = image_to_base64(z_t);
    req["t"] = t;
    req["prompt"] = prompt;
    req["cfg"] = cfg_strength;

    nlohmann::json reply = nlohmann::json::parse(roundtrip(req.dump(), id));
    if (reply.contains("error") && !reply["error"].is_null())
        throw BridgeProtocolError("bridge denoise error: " +
                                  reply["error"].get<std::string>());
    if (!reply.contains("eps_hat") || !reply["eps_hat"].is_string())
        throw BridgeProtocolError("bridge denoise response lacks eps_hat");
    std::vector<double> eps = base64_to_image(reply["eps_hat"].get<std::string>());
    if (eps.size() != z_t.size())
        throw BridgeProtocolError("bridge denoise payload length mismatch: expected " +
                                  std::to_string(z_t.size() * 4) + " bytes, got " +
                                  std::to_string(eps.size() * 4));
    return eps;
}

double BridgeGuidance::score(const std::vector<double>& image, int width, int height,
                             const std::string& text) {
    if (int64_t(image.size()) != int64_t(width) * height * 3)
        throw ContractError("bridge score: image size does not match dimensions");
    uint64_t id = next_id_++;
    nlohmann::json req;
    req["id"] = id;
    req["kind"] = "score";
    req["width"] = width;
    req["height"] = height;
    req["rgb"] = image_to_base64(image);
    req["text"] = text;

    nlohmann::json reply = nlohmann::json::parse(roundtrip(req.dump(), id));
    if (reply.contains("error") && !reply["error"].is_null())
        throw BridgeProtocolError("bridge score error: " + reply["error"].get<std::string>());
    if (!reply.contains("score") || !reply["score"].is_number())
        throw BridgeProtocolError("bridge score response lacks a numeric score");
    return reply["score"].get<double>();
}

}  // namespace layl
