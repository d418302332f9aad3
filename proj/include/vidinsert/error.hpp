// Copyright 2026 The vidinsert Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VIDINSERT_ERROR_HPP_
#define VIDINSERT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace vidinsert {

// Base of every error the library throws. The CLI maps the subclasses onto
// exit codes: usage 2, input 3, numeric 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that should agree do not. The message names the offending axis.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated files, bad JSON, unknown config keys.
class FormatError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf state, singular evaluations, divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Precondition on a caller-supplied value (range, missing data).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class CacheError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void check_axis(const char* axis, std::size_t got, std::size_t want) {
  if (got != want) {
    throw DimensionError(std::string(axis) + " mismatch: " +
                         std::to_string(got) + " vs " + std::to_string(want));
  }
}

}  // namespace detail
}  // namespace vidinsert

#endif  // VIDINSERT_ERROR_HPP_
