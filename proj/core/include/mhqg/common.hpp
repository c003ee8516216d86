#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mhqg {

// Error taxonomy. The command line tool maps these onto process exit codes,
// library callers can catch them selectively.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line / flag combination.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (corpus files, checkpoints, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor shapes in a numeric operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Training produced NaN/Inf.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// ASCII case folding; bytes outside [A-Z] pass through unchanged, which is
// the usual desk-scale treatment of UTF-8 token text.
std::string fold_case(std::string_view s);

// True if every character of the token is punctuation (no alphanumerics).
bool is_punct_token(std::string_view s);

// True if the first character is an ASCII uppercase letter.
bool starts_upper(std::string_view s);

}  // namespace mhqg
