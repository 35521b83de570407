#pragma once

// Machine translation behind a provider interface.
//
// Wire protocol for remote providers:
//   POST /v1/translate {texts:[...], source_lang, target_lang}
//     -> {translations:[...]}   (one output per input, same order)

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace relboot {

class TranslationProvider {
 public:
  virtual ~TranslationProvider() = default;

  virtual std::string name() const = 0;
  virtual bool supports(std::string_view source_lang,
                        std::string_view target_lang) const = 0;
  // Returns exactly one translation per input.
  virtual std::vector<std::string> translate(const std::vector<std::string>& texts,
                                             const std::string& source_lang,
                                             const std::string& target_lang) = 0;
};

// Returns its input unchanged; supports every pair.
class IdentityTranslator : public TranslationProvider {
 public:
  std::string name() const override { return "identity"; }
  bool supports(std::string_view, std::string_view) const override { return true; }
  std::vector<std::string> translate(const std::vector<std::string>& texts,
                                     const std::string&, const std::string&) override {
    return texts;
  }
};

// Deterministic table-driven stub. Whole sentences are looked up first; the
// fallback is greedy longest-match phrase substitution over whitespace
// tokens, with trailing punctuation kept in place and unknown tokens copied.
//
// File format:
//   {"pairs": [{"source_lang": "en", "target_lang": "hi",
//               "sentences": {"...": "..."}, "phrases": {"...": "..."}}]}
class DictionaryTranslator : public TranslationProvider {
 public:
  struct Table {
    std::map<std::string, std::string> sentences;
    std::map<std::string, std::string> phrases;
    std::size_t max_phrase_words = 1;
  };

  DictionaryTranslator() = default;
  explicit DictionaryTranslator(const nlohmann::json& spec);
  static DictionaryTranslator from_file(const std::filesystem::path& path);

  void add_pair(const std::string& source_lang, const std::string& target_lang, Table table);

  std::string name() const override { return "dictionary-stub"; }
  bool supports(std::string_view source_lang, std::string_view target_lang) const override;
  std::vector<std::string> translate(const std::vector<std::string>& texts,
                                     const std::string& source_lang,
                                     const std::string& target_lang) override;

  std::string translate_one(const std::string& text, const std::string& source_lang,
                            const std::string& target_lang) const;

 private:
  std::map<std::pair<std::string, std::string>, Table> tables_;
};

// Client for the HTTP protocol above. Throws TransportError / ProtocolError.
class HttpTranslator : public TranslationProvider {
 public:
  explicit HttpTranslator(std::string base_url);

  std::string name() const override { return "http:" + base_url_; }
  bool supports(std::string_view, std::string_view) const override { return true; }
  std::vector<std::string> translate(const std::vector<std::string>& texts,
                                     const std::string& source_lang,
                                     const std::string& target_lang) override;

 private:
  std::string base_url_;
};

// "identity", "stub:<dictionary.json>" or an http(s) URL.
std::unique_ptr<TranslationProvider> make_translator(const std::string& spec);

}  // namespace relboot
