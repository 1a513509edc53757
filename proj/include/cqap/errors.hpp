#pragma once

#include <stdexcept>
#include <string>

namespace cqap {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : std::runtime_error(msg + " at " + std::to_string(line) + ":" + std::to_string(column)),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// A combinatorial or size cap was hit; carries the count reached.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& msg, std::size_t count)
      : std::runtime_error(msg + " (count " + std::to_string(count) + ")"), count_(count) {}
  std::size_t count() const { return count_; }

 private:
  std::size_t count_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cqap
