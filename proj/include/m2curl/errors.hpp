#pragma once

#include <stdexcept>
#include <string>

namespace m2curl {

/// Shape or extent mismatch between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (non-scalar loss, step after done, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid configuration value or unknown name.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN or Inf produced by an operation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace m2curl
