#pragma once

#include <stdexcept>
#include <string>

namespace flakyci {

/// Failure classes, valued by the CLI exit code they map to.
enum class error_kind {
  input = 2,
  catalog = 3,
  invariant = 4,
};

class error : public std::runtime_error {
 public:
  error(error_kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  error_kind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  error_kind kind_;
};

/// Malformed or out-of-contract user input (records, config, parameters).
class input_error : public error {
 public:
  explicit input_error(const std::string& what)
      : error(error_kind::input, what) {}
};

/// Rule catalog cannot be loaded or compiled.
class catalog_error : public error {
 public:
  explicit catalog_error(const std::string& what)
      : error(error_kind::catalog, what) {}
};

/// An internal invariant did not hold.
class invariant_error : public error {
 public:
  explicit invariant_error(const std::string& what)
      : error(error_kind::invariant, what) {}
};

}  // namespace flakyci
