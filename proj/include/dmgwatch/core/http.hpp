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
#include <string>

#include "dmgwatch/core/io.hpp"

namespace dmgwatch {

struct HttpResponse {
  int status = 0;
  std::string content_type;
  Bytes body;
};

/// Blocking GET of an http:// or https:// URL. Transport failures throw
/// Error(fetch); non-2xx statuses are returned to the caller.
HttpResponse http_get(const std::string& url,
                      std::chrono::milliseconds timeout = std::chrono::seconds(20));

}  // namespace dmgwatch
