#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "r2a/attn.hpp"
#include "r2a/relu.hpp"

namespace r2a {

using Json = nlohmann::json;

// Sorted keys, no whitespace, doubles as %.17g, integers verbatim.
std::string canonical_dump(const Json& j);

std::string relu_to_json(const ReluNetwork& net);
ReluNetwork relu_from_json(const std::string& text);

std::string transformer_to_json(const TransformerNetwork& net);
TransformerNetwork transformer_from_json(const std::string& text);

Json report_to_json(const ResourceReport& r);

std::string read_file(const std::string& path);
// Writes to a sibling temp file and renames it over path.
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace r2a
