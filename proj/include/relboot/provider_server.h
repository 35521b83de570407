#pragma once

// HTTP front ends that expose a local provider over the embedding and
// translation wire protocols. Used by the stub provider servers and tests.

#include <mutex>

namespace httplib {
class Server;
}

namespace relboot {

class EmbeddingProvider;
class TranslationProvider;

// Routes: GET /v1/info, POST /v1/embed. Calls into `provider` are serialized.
void mount_embedding_routes(httplib::Server& server, EmbeddingProvider& provider,
                            std::mutex& mu);

// Route: POST /v1/translate.
void mount_translation_routes(httplib::Server& server, TranslationProvider& provider,
                              std::mutex& mu);

}  // namespace relboot
