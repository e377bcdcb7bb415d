#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "ergo/types.hpp"
#include "line_source.hpp"

namespace ergo::cli {

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

class TcpLineSource : public LineSource {
 public:
  explicit TcpLineSource(int fd) : fd_(fd) {}

  bool next(std::string& line) override {
    for (;;) {
      const auto nl = buffer_.find('\n', start_);
      if (nl != std::string::npos) {
        line.assign(buffer_, start_, nl - start_);
        start_ = nl + 1;
        strip_cr(line);
        return true;
      }
      if (eof_) {
        if (start_ >= buffer_.size()) return false;
        line.assign(buffer_, start_, std::string::npos);
        start_ = buffer_.size();
        strip_cr(line);
        return true;
      }
      buffer_.erase(0, start_);
      start_ = 0;
      char chunk[65536];
      const auto n = ::recv(fd_.get(), chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw RuntimeError(fmt::format("socket read failed: {}", std::strerror(errno)));
      }
      if (n == 0) eof_ = true;
      else buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  Fd fd_;
  std::string buffer_;
  std::size_t start_ = 0;
  bool eof_ = false;
};

}  // namespace

bool StreamLineSource::next(std::string& line) {
  if (!std::getline(in_, line)) return false;
  strip_cr(line);
  return true;
}

std::unique_ptr<LineSource> listen_tcp(std::uint16_t port) {
  Fd server(::socket(AF_INET, SOCK_STREAM, 0));
  if (server.get() < 0) throw RuntimeError(fmt::format("cannot create socket: {}", std::strerror(errno)));
  const int yes = 1;
  ::setsockopt(server.get(), SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(server.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
    throw RuntimeError(fmt::format("cannot bind port {}: {}", port, std::strerror(errno)));
  if (::listen(server.get(), 1) < 0) throw RuntimeError(fmt::format("listen failed: {}", std::strerror(errno)));
  int client;
  do {
    client = ::accept(server.get(), nullptr, nullptr);
  } while (client < 0 && errno == EINTR);
  if (client < 0) throw RuntimeError(fmt::format("accept failed: {}", std::strerror(errno)));
  return std::make_unique<TcpLineSource>(client);
}

}  // namespace ergo::cli
