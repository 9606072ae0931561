#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace tracelens {

/// First JSON object found in free-form model output. Fenced ```json blocks
/// are tried first, then every balanced {...} region in order.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

/// Body of the longest fenced code block (the text between the opening
/// fence line and the closing fence), or nullopt when there is none.
std::optional<std::string> extract_fenced_block(std::string_view text);

/// SHA-256 of `data` as lowercase hex.
std::string sha256_hex(std::string_view data);

std::string_view trim(std::string_view s);

}  // namespace tracelens
