#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pacvd {

/// Base class of every domain error raised by the toolkit.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
  public:
    ParseError(int line, int column, std::string expected, std::string found)
        : Error("parse error at " + std::to_string(line) + ":" + std::to_string(column) +
                ": expected " + expected + ", found " + found),
          line_(line), column_(column), expected_(std::move(expected)) {}

    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& expected() const { return expected_; }

  private:
    int line_;
    int column_;
    std::string expected_;
};

class EncodingError : public Error {
  public:
    explicit EncodingError(std::size_t offset)
        : Error("invalid UTF-8 at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

class RootNotFound : public Error {
  public:
    explicit RootNotFound(const std::string& name) : Error("function not found: " + name) {}
};

class AmbiguousRoot : public Error {
  public:
    AmbiguousRoot(const std::string& name, std::size_t count)
        : Error("function " + name + " has " + std::to_string(count) + " definitions") {}
};

/// Malformed catalog, dataset, config or transcript document. `line` is 1-based, 0 when unknown.
class SchemaError : public Error {
  public:
    SchemaError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

class DuplicateEntry : public SchemaError {
  public:
    DuplicateEntry(std::size_t line, const std::string& name)
        : SchemaError(line, "duplicate entry: " + name) {}
};

class InsufficientExemplars : public Error {
  public:
    InsufficientExemplars(std::size_t needed, std::size_t available)
        : Error("need " + std::to_string(needed) + " exemplars, " + std::to_string(available) +
                " eligible") {}
};

class UnresolvedPlaceholder : public Error {
  public:
    explicit UnresolvedPlaceholder(const std::string& name)
        : Error("unresolved placeholder " + name) {}
};

class AuthMissing : public Error {
  public:
    explicit AuthMissing(const std::string& var)
        : Error("environment variable " + var + " is not set") {}
};

/// Transient transport failure; retried by the gateway.
class TransportError : public Error {
  public:
    using Error::Error;
};

/// Definitive upstream rejection; never retried.
class ProviderError : public Error {
  public:
    ProviderError(int status, const std::string& message)
        : Error("provider returned " + std::to_string(status) + ": " + message), status_(status) {}
    int status() const { return status_; }

  private:
    int status_;
};

class UnscriptedPrompt : public Error {
  public:
    explicit UnscriptedPrompt(const std::string& fingerprint)
        : Error("no scripted reply for prompt " + fingerprint) {}
};

class EmptyInput : public Error {
  public:
    using Error::Error;
};

}  // namespace pacvd
