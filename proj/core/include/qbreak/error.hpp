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

#ifndef QBREAK_ERROR_HPP_
#define QBREAK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace qbreak {

// Broad failure classes. The CLI maps them onto exit codes.
enum class ErrorKind {
  kInvalidInput,  // caller violated a precondition
  kData,          // input data unusable (missing columns, too few rows)
  kNumerical,     // solver or matrix failure on otherwise valid input
};

// "invalid_input", "data" or "numerical".
const char* to_string(ErrorKind kind);

// Every library failure carries the module it originated in, so that
// messages propagated through the analysis pipeline keep their provenance.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

[[noreturn]] void throw_invalid(const std::string& module,
                                const std::string& message);
[[noreturn]] void throw_data(const std::string& module,
                             const std::string& message);
[[noreturn]] void throw_numerical(const std::string& module,
                                  const std::string& message);

}  // namespace qbreak

#endif  // QBREAK_ERROR_HPP_
