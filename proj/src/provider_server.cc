#include "relboot/provider_server.h"

#include <httplib.h>

#include <json.hpp>

#include "relboot/embedding.h"
#include "relboot/translation.h"

namespace relboot {
namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void bad_request(httplib::Response& res, const std::string& msg) {
  reply(res, 400, {{"error", msg}});
}

std::vector<std::string> texts_of(const nlohmann::json& j) {
  if (!j.contains("texts") || !j["texts"].is_array()) throw std::invalid_argument("texts must be an array");
  std::vector<std::string> texts;
  for (const auto& t : j["texts"]) {
    if (!t.is_string()) throw std::invalid_argument("texts must be strings");
    texts.push_back(t.get<std::string>());
  }
  return texts;
}

}  // namespace

void mount_embedding_routes(httplib::Server& server, EmbeddingProvider& provider,
                            std::mutex& mu) {
  server.Get("/v1/info", [&](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(mu);
    reply(res, 200, {{"dimension", provider.dimension()}, {"name", provider.name()}});
  });
  server.Post("/v1/embed", [&](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json j;
    std::vector<std::string> texts;
    try {
      j = nlohmann::json::parse(req.body);
      texts = texts_of(j);
    } catch (const std::exception& e) {
      return bad_request(res, e.what());
    }
    std::string gran = j.value("granularity", "sentence");
    std::lock_guard lock(mu);
    if (gran == "sentence") {
      reply(res, 200, {{"vectors", provider.embed_sentences(texts)}});
    } else if (gran == "tokens") {
      reply(res, 200, {{"token_vectors", provider.embed_tokens(texts)}});
    } else {
      bad_request(res, "granularity must be sentence or tokens");
    }
  });
}

void mount_translation_routes(httplib::Server& server, TranslationProvider& provider,
                              std::mutex& mu) {
  server.Post("/v1/translate", [&](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json j;
    std::vector<std::string> texts;
    std::string src, tgt;
    try {
      j = nlohmann::json::parse(req.body);
      texts = texts_of(j);
      src = j.at("source_lang").get<std::string>();
      tgt = j.at("target_lang").get<std::string>();
    } catch (const std::exception& e) {
      return bad_request(res, e.what());
    }
    std::lock_guard lock(mu);
    if (!provider.supports(src, tgt)) return bad_request(res, "unsupported pair " + src + "->" + tgt);
    try {
      reply(res, 200, {{"translations", provider.translate(texts, src, tgt)}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  });
}

}  // namespace relboot
