// Copyright 2026 The dmgwatch Authors
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
#include <string_view>

namespace dmgwatch {

enum class ErrorCode {
  invalid_argument,
  io,
  parse,
  duplicate_id,
  shape_mismatch,
  decode,
  numeric,
  not_found,
  conflict,
  fetch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Structured failure carried through every module.
///
/// `subject` names the offending thing (a row, an image id, a tensor name)
/// when there is one, so callers can report it without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string subject = {})
      : std::runtime_error(message), code_(code), subject_(std::move(subject)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

}  // namespace dmgwatch
