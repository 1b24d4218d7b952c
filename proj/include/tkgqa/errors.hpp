#pragma once

#include <stdexcept>
#include <string>

namespace tkgqa {

// Base class for all project errors. Subclasses exist so callers can map
// failure classes to exit codes and retry decisions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- data / parsing errors ---------------------------------------------

class MalformedTimestamp : public Error {
 public:
  explicit MalformedTimestamp(const std::string& text)
      : Error("malformed timestamp: \"" + text + "\"") {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line_no, const std::string& what)
      : Error("line " + std::to_string(line_no) + ": " + what),
        line_no_(line_no) {}
  std::size_t line_no() const { return line_no_; }

 private:
  std::size_t line_no_;
};

class KTooLarge : public Error {
 public:
  explicit KTooLarge(const std::string& what) : Error(what) {}
};

// --- index / scoring errors --------------------------------------------

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

class UnknownFactId : public Error {
 public:
  explicit UnknownFactId(std::uint64_t id)
      : Error("unknown fact id: " + std::to_string(id)) {}
};

// --- upstream-service errors -------------------------------------------

class EmbedderUnavailable : public Error {
 public:
  explicit EmbedderUnavailable(const std::string& what) : Error(what) {}
};

class EndpointUnavailable : public Error {
 public:
  explicit EndpointUnavailable(const std::string& what) : Error(what) {}
};

class RateLimited : public Error {
 public:
  explicit RateLimited(const std::string& what) : Error(what) {}
};

class ContextTooLong : public Error {
 public:
  explicit ContextTooLong(const std::string& what) : Error(what) {}
};

class SamplingExhausted : public Error {
 public:
  explicit SamplingExhausted(const std::string& what) : Error(what) {}
};

// --- configuration / usage errors --------------------------------------

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

class PreconditionViolation : public Error {
 public:
  explicit PreconditionViolation(const std::string& what) : Error(what) {}
};

}  // namespace tkgqa
