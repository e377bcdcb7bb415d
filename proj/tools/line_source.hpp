#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <string>

namespace ergo::cli {

/// Newline-delimited records from some byte source.
class LineSource {
 public:
  virtual ~LineSource() = default;
  /// False at end of input. The trailing '\r' of CRLF input is removed.
  virtual bool next(std::string& line) = 0;
};

class StreamLineSource : public LineSource {
 public:
  explicit StreamLineSource(std::istream& in) : in_(in) {}
  bool next(std::string& line) override;

 private:
  std::istream& in_;
};

/// Listens on a TCP port, accepts a single client and reads its records
/// until the client disconnects.
std::unique_ptr<LineSource> listen_tcp(std::uint16_t port);

}  // namespace ergo::cli
