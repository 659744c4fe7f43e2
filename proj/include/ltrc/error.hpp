/*
 * Copyright 2026 The ltrcdr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LTRC_ERROR_HPP
#define LTRC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ltrc {

// Base of every error thrown by the library. The CLI maps ArgumentError and
// SchemaError raised while reading flags/config to exit code 1, everything
// else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what + " (row " + std::to_string(row) + ", column " +
              std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Optimizer failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : Error(what + " (final gradient inf-norm " +
              std::to_string(gradient_norm) + ")"),
        gradient_norm_(gradient_norm) {}

  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

// A quantity that must be nonzero/nonempty for the estimator to exist is not.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced inside an operator term.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A nuisance fit on the out-of-fold data of one fold failed.
class FoldFitError : public Error {
 public:
  FoldFitError(int fold, const std::string& what)
      : Error("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}

  int fold() const { return fold_; }

 private:
  int fold_;
};

}  // namespace ltrc

#endif  // LTRC_ERROR_HPP
