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

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

namespace dmgwatch {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Clock = std::function<Timestamp()>;

Timestamp now_utc();

/// "2020-10-30T21:15:00Z", with ".mmm" added when milliseconds are non-zero.
std::string format_rfc3339(Timestamp t);

/// Accepts "Z" or "+hh:mm"/"-hh:mm" offsets and optional fractional seconds.
Timestamp parse_rfc3339(std::string_view text);

}  // namespace dmgwatch
