#pragma once

#include <stdexcept>
#include <string>

namespace plud {

/// Base of every error the library raises. `kind()` drives CLI exit codes
/// and HTTP status mapping.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    kInvalidArgument,
    kFormat,
    kData,
    kNotFound,
    kConflict,
    kUnprocessable,
    kLock,
    kPrerequisite,
    kEnvironment,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(Kind::kInvalidArgument, w) {}
};
/// Malformed bytes or records (bad magic, truncated blob, bad JSON line).
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(Kind::kFormat, w) {}
};
/// Well-formed input carrying unusable values (non-finite floats).
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(Kind::kData, w) {}
};
struct NotFound : Error {
  explicit NotFound(const std::string& w) : Error(Kind::kNotFound, w) {}
};
/// State conflict: stale revision, task already submitted, already bootstrapped.
struct Conflict : Error {
  explicit Conflict(const std::string& w) : Error(Kind::kConflict, w) {}
};
struct Unprocessable : Error {
  explicit Unprocessable(const std::string& w) : Error(Kind::kUnprocessable, w) {}
};
struct LockHeld : Error {
  explicit LockHeld(const std::string& w) : Error(Kind::kLock, w) {}
};
struct MissingPrerequisite : Error {
  explicit MissingPrerequisite(const std::string& w) : Error(Kind::kPrerequisite, w) {}
};
struct EnvironmentError : Error {
  explicit EnvironmentError(const std::string& w) : Error(Kind::kEnvironment, w) {}
};

}  // namespace plud
