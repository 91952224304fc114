// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "backend.hpp"
#include "core.hpp"

namespace picl {

/// Maps a non-2xx response to a BackendError. 429 and 5xx are retryable;
/// any other status with a JSON error body is terminal.
BackendError http_status_error(int status, const std::string& body);

/// POSTs a JSON body and returns the parsed JSON response. Transport
/// failures raise retryable BackendErrors.
json post_json(const HttpEndpoint& endpoint, const std::string& api_key, const json& body, int timeout_s);

}  // namespace picl
