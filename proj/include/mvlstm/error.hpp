// SPDX-License-Identifier: Apache-2.0
/**
 * @file   error.hpp
 * @brief  Exception hierarchy used throughout the core library. The C API
 *         maps each type onto a status code.
 */

#ifndef MVLSTM_ERROR_HPP
#define MVLSTM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mvlstm {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractViolation : public Error {
public:
  using Error::Error;
};

/// Bad or incomplete run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Non-finite loss or other numeric breakdown during training.
class NumericError : public Error {
public:
  using Error::Error;
};

} // namespace mvlstm

#endif // MVLSTM_ERROR_HPP
