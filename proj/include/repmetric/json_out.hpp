#pragma once

#include <string>

#include <json.hpp>

namespace repmetric {

using ordered_json = nlohmann::ordered_json;

// Serializer for report documents: insertion-ordered fields, floats with
// 17 significant digits (exact 64-bit round trip), NaN/Inf rejected
// instead of emitted as text. Two-space indentation.
std::string dump_json(const ordered_json& value);

}  // namespace repmetric
