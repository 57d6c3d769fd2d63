// Copyright 2026 The qbreak Authors
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

#include "qbreak/error.hpp"

#include <utility>

namespace qbreak {

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error(module + ": " + message),
      kind_(kind),
      module_(std::move(module)) {}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid_input";
    case ErrorKind::kData: return "data";
    case ErrorKind::kNumerical: return "numerical";
  }
  return "invalid_input";
}

void throw_invalid(const std::string& module, const std::string& message) {
  throw Error(ErrorKind::kInvalidInput, module, message);
}

void throw_data(const std::string& module, const std::string& message) {
  throw Error(ErrorKind::kData, module, message);
}

void throw_numerical(const std::string& module, const std::string& message) {
  throw Error(ErrorKind::kNumerical, module, message);
}

}  // namespace qbreak
