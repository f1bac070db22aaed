#pragma once

// Append-only JSON Lines journal. Each append is a single write followed by
// fsync. On load, a final line that is incomplete or unparsable (an
// interrupted append) is truncated away; a bad line anywhere else is an error.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plud/error.hpp"

namespace plud {

class Journal {
 public:
  explicit Journal(std::filesystem::path path) : path_(std::move(path)) {}

  const std::filesystem::path& path() const noexcept { return path_; }

  std::vector<nlohmann::json> load() {
    std::vector<nlohmann::json> events;
    if (!std::filesystem::exists(path_)) return events;
    std::ifstream in(path_, std::ios::binary);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
      ++line_no;
      const auto nl = text.find('\n', pos);
      const bool last = nl == std::string::npos || nl + 1 == text.size();
      const auto line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
      nlohmann::json event;
      bool ok = nl != std::string::npos;
      if (ok) {
        try {
          event = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
          ok = false;
        }
      }
      if (!ok) {
        if (!last) throw FormatError("journal " + path_.string() + ": corrupt record on line " + std::to_string(line_no));
        std::filesystem::resize_file(path_, pos);
        truncated_ = true;
        break;
      }
      events.push_back(std::move(event));
      pos = nl + 1;
    }
    return events;
  }

  void append(const nlohmann::json& event) {
    const auto line = event.dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw EnvironmentError("journal: cannot open " + path_.string() + ": " + std::strerror(errno));
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(fd, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        ::close(fd);
        throw EnvironmentError("journal: write failed: " + std::string(std::strerror(errno)));
      }
      written += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
  }

  /// True when the last load dropped an interrupted trailing record.
  bool truncated_on_load() const noexcept { return truncated_; }

 private:
  std::filesystem::path path_;
  bool truncated_ = false;
};

}  // namespace plud
