#pragma once

// JSON mappings shared by the snapshot, protocol, and HTTP layers.

#include <json.hpp>

#include "groundwork/corpus.hpp"

namespace groundwork {

using Json = nlohmann::json;

/// Field names match DocumentSource exactly; absent optionals are omitted.
Json source_to_json(const DocumentSource& source);
/// Throws CorpusError naming the first missing or mistyped field.
DocumentSource source_from_json(const Json& j);

}  // namespace groundwork
