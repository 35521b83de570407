#pragma once

#include <string>

#include <json.hpp>

namespace relboot {

// Thin JSON-over-HTTP helpers for provider clients. Connection failures and
// non-2xx statuses throw TransportError; unparseable bodies ProtocolError.
nlohmann::json http_get_json(const std::string& base_url, const std::string& path);
nlohmann::json http_post_json(const std::string& base_url, const std::string& path,
                              const nlohmann::json& body);

}  // namespace relboot
