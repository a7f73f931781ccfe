// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_ERRORS_HPP
#define DPA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dpa {

/// Binary/file format violations (embedding store, model files).
class FormatError : public std::runtime_error {
 public:
  enum class Kind {
    BadMagic,
    BadVersion,
    Truncated,
    SizeMismatch,
    IdMismatch,
  };

  FormatError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// A malformed JSONL record; carries the 1-based line number.
class JsonlError : public std::runtime_error {
 public:
  JsonlError(std::size_t line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Remote/mock LLM and NLI service failures.
class GatewayError : public std::runtime_error {
 public:
  enum class Kind {
    Auth,           // credentials rejected, never retried
    Timeout,        // transient, retried; surfaced after retries exhausted
    Transport,      // connection-level failure, retried
    MalformedBody,  // response did not match the wire contract
    UnmappedPrompt, // strict mock had no entry for the prompt
    BadReply,       // reply text failed task-level parsing
  };

  GatewayError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A pipeline stage was started before its producer stage ran.
class MissingUpstreamError : public std::runtime_error {
 public:
  explicit MissingUpstreamError(const std::string& msg)
      : std::runtime_error(msg) {}
};

}  // namespace dpa

#endif  // DPA_ERRORS_HPP
