#ifndef DTPM_ERRORS_HPP
#define DTPM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dtpm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters or command-line configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Malformed or unusable input data (CSV content, labels, widths).
class DataError : public Error {
  public:
    using Error::Error;
};

/// Non-finite values produced or consumed during numeric work.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Caller broke a precondition of the API.
class ContractError : public Error {
  public:
    using Error::Error;
};

/// Matrix or vector shapes do not line up.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// Index outside its valid range.
class IndexError : public Error {
  public:
    using Error::Error;
};

/// A metric is undefined for the given labels.
class MetricError : public Error {
  public:
    using Error::Error;
};

}  // namespace dtpm

#endif
