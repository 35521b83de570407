#include "relboot/translation.h"

#include <stdexcept>

#include "relboot/errors.h"
#include "relboot/http_util.h"
#include "relboot/records.h"
#include "relboot/unicode.h"

namespace relboot {
namespace {

bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

std::string join(const std::vector<std::string>& words, std::size_t a, std::size_t b) {
  std::string out;
  for (std::size_t i = a; i < b; ++i) {
    if (i > a) out.push_back(' ');
    out += words[i];
  }
  return out;
}

}  // namespace

DictionaryTranslator::DictionaryTranslator(const nlohmann::json& spec) {
  if (!spec.contains("pairs") || !spec["pairs"].is_array()) {
    throw ParseError("dictionary: expected a \"pairs\" array");
  }
  for (const auto& p : spec["pairs"]) {
    Table t;
    if (p.contains("sentences")) {
      for (const auto& [k, v] : p["sentences"].items()) {
        t.sentences[collapse_whitespace(k)] = v.get<std::string>();
      }
    }
    if (p.contains("phrases")) {
      for (const auto& [k, v] : p["phrases"].items()) {
        t.phrases[collapse_whitespace(k)] = v.get<std::string>();
      }
    }
    add_pair(p.at("source_lang").get<std::string>(), p.at("target_lang").get<std::string>(),
             std::move(t));
  }
}

DictionaryTranslator DictionaryTranslator::from_file(const std::filesystem::path& path) {
  return DictionaryTranslator(nlohmann::json::parse(read_file(path)));
}

void DictionaryTranslator::add_pair(const std::string& source_lang,
                                    const std::string& target_lang, Table table) {
  table.max_phrase_words = 1;
  for (const auto& [k, v] : table.phrases) {
    table.max_phrase_words = std::max(table.max_phrase_words, split_whitespace(k).size());
  }
  tables_[{source_lang, target_lang}] = std::move(table);
}

bool DictionaryTranslator::supports(std::string_view source_lang,
                                    std::string_view target_lang) const {
  if (source_lang == target_lang) return true;
  return tables_.count({std::string(source_lang), std::string(target_lang)}) > 0;
}

std::string DictionaryTranslator::translate_one(const std::string& text,
                                                const std::string& source_lang,
                                                const std::string& target_lang) const {
  if (source_lang == target_lang) return text;
  auto it = tables_.find({source_lang, target_lang});
  if (it == tables_.end()) {
    throw std::invalid_argument("dictionary-stub: unsupported pair " + source_lang + "->" +
                                target_lang);
  }
  const Table& t = it->second;
  auto normalized = collapse_whitespace(text);
  if (auto s = t.sentences.find(normalized); s != t.sentences.end()) return s->second;

  // Peel trailing punctuation off each token so "Italy." matches "Italy".
  std::vector<std::string> words;
  std::vector<std::string> tails;
  for (auto w : split_whitespace(normalized)) {
    std::string tail;
    while (w.size() > 1 && is_trailing_punct(w.back())) {
      tail.insert(tail.begin(), w.back());
      w.pop_back();
    }
    words.push_back(w);
    tails.push_back(tail);
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < words.size()) {
    std::size_t matched = 0;
    std::string replacement;
    for (std::size_t len = std::min(t.max_phrase_words, words.size() - i); len >= 1; --len) {
      // A phrase may only absorb punctuation on its last word.
      bool clean = true;
      for (std::size_t k = i; k + 1 < i + len; ++k) clean = clean && tails[k].empty();
      if (!clean) continue;
      auto p = t.phrases.find(join(words, i, i + len));
      if (p != t.phrases.end()) {
        matched = len;
        replacement = p->second;
        break;
      }
    }
    if (matched == 0) {
      out.push_back(words[i] + tails[i]);
      ++i;
    } else {
      if (!replacement.empty()) out.push_back(replacement + tails[i + matched - 1]);
      i += matched;
    }
  }
  return collapse_whitespace(join(out, 0, out.size()));
}

std::vector<std::string> DictionaryTranslator::translate(const std::vector<std::string>& texts,
                                                         const std::string& source_lang,
                                                         const std::string& target_lang) {
  std::vector<std::string> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(translate_one(t, source_lang, target_lang));
  return out;
}

HttpTranslator::HttpTranslator(std::string base_url) : base_url_(std::move(base_url)) {}

std::vector<std::string> HttpTranslator::translate(const std::vector<std::string>& texts,
                                                   const std::string& source_lang,
                                                   const std::string& target_lang) {
  nlohmann::json body = {{"texts", texts},
                         {"source_lang", source_lang},
                         {"target_lang", target_lang}};
  auto resp = http_post_json(base_url_, "/v1/translate", body);
  if (!resp.contains("translations") || !resp["translations"].is_array()) {
    throw ProtocolError("translate: response lacks \"translations\" array");
  }
  const auto& arr = resp["translations"];
  if (arr.size() != texts.size()) {
    throw ProtocolError("translate: expected " + std::to_string(texts.size()) +
                        " translations, got " + std::to_string(arr.size()));
  }
  std::vector<std::string> out;
  for (const auto& t : arr) {
    if (!t.is_string()) throw ProtocolError("translate: non-string translation");
    out.push_back(t.get<std::string>());
  }
  return out;
}

std::unique_ptr<TranslationProvider> make_translator(const std::string& spec) {
  if (spec == "identity") return std::make_unique<IdentityTranslator>();
  if (spec.rfind("stub:", 0) == 0) {
    return std::make_unique<DictionaryTranslator>(DictionaryTranslator::from_file(spec.substr(5)));
  }
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    return std::make_unique<HttpTranslator>(spec);
  }
  throw std::invalid_argument("unrecognized translator spec: " + spec);
}

}  // namespace relboot
