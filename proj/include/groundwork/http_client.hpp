#pragma once

#include "groundwork/embed.hpp"
#include "groundwork/serialize.hpp"

namespace groundwork {

/// POSTs a JSON body to endpoint.url and parses the JSON reply. Connection
/// failures and 5xx replies raise TransportError(retry_safe = true); other
/// non-2xx replies and unparsable bodies raise TransportError(retry_safe = false).
Json post_json(const RemoteEndpoint& endpoint, const Json& body);

}  // namespace groundwork
