/* Copyright 2026 The facadegen Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef FACADE_COMMON_ERRORS_H_
#define FACADE_COMMON_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace facade {

// Error taxonomy shared by every module. Each class carries a stable `kind()`
// string so the CLI and the service can emit machine-readable error records.

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
  virtual const char* kind() const noexcept { return "invalid-argument"; }
};

// Request was well-formed but a value is outside the accepted domain
// (maps to HTTP 422).
class Unprocessable : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
  const char* kind() const noexcept override { return "unprocessable"; }
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AssetNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, std::string diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class CorruptArchive : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stable identifier for any exception thrown by this code base.
inline const char* error_kind(const std::exception& e) noexcept {
  if (auto* p = dynamic_cast<const InvalidArgument*>(&e)) return p->kind();
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid-argument";
  if (dynamic_cast<const NotFound*>(&e)) return "not-found";
  if (dynamic_cast<const AssetNotFound*>(&e)) return "asset-not-found";
  if (dynamic_cast<const DegenerateInput*>(&e)) return "degenerate-input";
  if (dynamic_cast<const ParseError*>(&e)) return "parse-error";
  if (dynamic_cast<const TrainingDivergence*>(&e)) return "training-divergence";
  if (dynamic_cast<const CorruptArchive*>(&e)) return "corrupt-archive";
  return "runtime-error";
}

}  // namespace facade

#endif  // FACADE_COMMON_ERRORS_H_
