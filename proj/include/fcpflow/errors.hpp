#pragma once

#include <stdexcept>
#include <string>

namespace fcpflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
public:
	using Error::Error;
};

/// A pointwise operation was evaluated outside its domain (log of a
/// non-positive value, division by zero).
class DomainError : public Error {
public:
	using Error::Error;
};

/// A documented precondition of an operation was violated.
class ContractError : public Error {
public:
	using Error::Error;
};

/// A computation produced NaN or Inf.
class NumericError : public Error {
public:
	using Error::Error;
};

/// Invalid hyper-parameter or configuration value.
class ConfigError : public Error {
public:
	using Error::Error;
};

/// An object was used in a state that does not support the request.
class StateError : public Error {
public:
	using Error::Error;
};

/// Scaler could not be fitted (e.g. a constant condition column).
class ScaleError : public Error {
public:
	using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
	using Error::Error;
};

/// Checkpoint could not be read or failed validation.
class LoadError : public Error {
public:
	using Error::Error;
};

/// Checkpoint or manifest is missing a field or has the wrong layout.
class SchemaError : public LoadError {
public:
	using LoadError::LoadError;
};

} // namespace fcpflow
