#include "relboot/http_util.h"

#include <httplib.h>

#include "relboot/errors.h"

namespace relboot {
namespace {

httplib::Client make_client(const std::string& base_url) {
  httplib::Client cli(base_url);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(60);
  return cli;
}

nlohmann::json decode(const httplib::Result& res, const std::string& what) {
  if (!res) {
    throw TransportError(what + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError(what + ": HTTP " + std::to_string(res->status) + " " + res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(what + ": invalid JSON body: " + e.what());
  }
}

}  // namespace

nlohmann::json http_get_json(const std::string& base_url, const std::string& path) {
  auto cli = make_client(base_url);
  return decode(cli.Get(path), "GET " + base_url + path);
}

nlohmann::json http_post_json(const std::string& base_url, const std::string& path,
                              const nlohmann::json& body) {
  auto cli = make_client(base_url);
  return decode(cli.Post(path, body.dump(), "application/json"), "POST " + base_url + path);
}

}  // namespace relboot
