// Copyright 2026 The arnn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace arnn {

// Base of every error raised by the toolkit. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data, inconsistent files, out-of-range ids.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or gradients.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Incompatible array shapes or dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad option values or missing arguments.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace arnn
