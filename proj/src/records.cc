#include "relboot/records.h"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "relboot/errors.h"

namespace relboot {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const json& field(const json& j, const char* name, std::size_t line) {
  auto it = j.find(name);
  if (it == j.end()) {
    throw ParseError(std::string("missing field \"") + name + "\"", line);
  }
  return *it;
}

std::string string_field(const json& j, const char* name, std::size_t line) {
  const auto& v = field(j, name, line);
  if (!v.is_string()) {
    throw ParseError(std::string("field \"") + name + "\" must be a string", line);
  }
  return v.get<std::string>();
}

std::size_t offset_field(const json& j, const char* name, std::size_t line) {
  const auto& v = field(j, name, line);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ParseError(std::string("field \"") + name +
                         "\" must be a nonnegative integer", line);
  }
  return v.get<std::size_t>();
}

ordered_json mention_json(const EntityMention& m) {
  ordered_json j;
  j["surface"] = m.surface;
  j["start"] = m.span.start;
  j["end"] = m.span.end;
  if (m.etype) {
    j["etype"] = std::string(to_string(*m.etype));
  } else {
    j["etype"] = nullptr;
  }
  return j;
}

EntityMention mention_from_json(const json& j, const char* role, std::size_t line) {
  if (!j.is_object()) {
    throw ParseError(std::string("field \"") + role + "\" must be an object", line);
  }
  EntityMention m;
  m.surface = string_field(j, "surface", line);
  m.span.start = offset_field(j, "start", line);
  m.span.end = offset_field(j, "end", line);
  if (auto it = j.find("etype"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("etype must be a string or null", line);
    auto t = parse_entity_type(it->get<std::string>());
    if (!t) throw ParseError("unknown entity type \"" + it->get<std::string>() + "\"", line);
    m.etype = *t;
  }
  return m;
}

}  // namespace

ordered_json to_json(const Instance& inst) {
  ordered_json j;
  j["id"] = inst.id;
  j["lang"] = inst.lang;
  j["text"] = inst.text;
  j["relation"] = inst.relation;
  j["e1"] = mention_json(inst.e1);
  j["e2"] = mention_json(inst.e2);
  j["grade"] = std::string(to_string(inst.grade));
  j["source"] = std::string(to_string(inst.source));
  if (inst.provenance) {
    ordered_json p;
    p["source_id"] = inst.provenance->source_id;
    p["provider"] = inst.provenance->provider;
    j["provenance"] = p;
  }
  return j;
}

Instance instance_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("record must be a JSON object", line);
  Instance inst;
  inst.id = string_field(j, "id", line);
  inst.lang = string_field(j, "lang", line);
  if (!is_known_language(inst.lang)) {
    throw ParseError("unknown language code \"" + inst.lang + "\"", line);
  }
  inst.text = string_field(j, "text", line);
  inst.relation = string_field(j, "relation", line);
  inst.e1 = mention_from_json(field(j, "e1", line), "e1", line);
  inst.e2 = mention_from_json(field(j, "e2", line), "e2", line);
  auto grade = parse_grade(string_field(j, "grade", line));
  if (!grade) throw ParseError("unknown grade", line);
  inst.grade = *grade;
  auto source = parse_source(string_field(j, "source", line));
  if (!source) throw ParseError("unknown source", line);
  inst.source = *source;
  if (auto it = j.find("provenance"); it != j.end() && !it->is_null()) {
    Provenance p;
    p.source_id = string_field(*it, "source_id", line);
    p.provider = string_field(*it, "provider", line);
    inst.provenance = std::move(p);
  }
  return inst;
}

std::string to_record_line(const Instance& inst) {
  return to_json(inst).dump(-1, ' ', false);
}

std::vector<Instance> read_records(std::istream& in) {
  std::vector<Instance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    out.push_back(instance_from_json(j, lineno));
  }
  return out;
}

std::vector<Instance> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_records(in);
}

void write_records(std::span<const Instance> instances, std::ostream& out) {
  for (const auto& inst : instances) out << to_record_line(inst) << '\n';
}

void write_records(std::span<const Instance> instances,
                   const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_records(instances, out);
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": malformed JSON: " + e.what(), lineno);
    }
  }
  return out;
}

void write_jsonl(const std::vector<ordered_json>& rows,
                 const std::filesystem::path& path) {
  std::ostringstream os;
  for (const auto& r : rows) os << r.dump(-1, ' ', false) << '\n';
  write_file(path, os.str());
}

ordered_json to_json(const RelationLabel& rel) {
  ordered_json j;
  j["id"] = rel.id;
  j["name"] = rel.name;
  j["description"] = rel.description;
  j["aliases"] = rel.aliases;
  j["triple_count"] = rel.triple_count;
  return j;
}

RelationLabel relation_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("relation must be a JSON object", line);
  RelationLabel r;
  r.id = string_field(j, "id", line);
  if (r.id.empty()) throw ParseError("relation id must be nonempty", line);
  r.name = j.contains("name") ? string_field(j, "name", line) : r.id;
  r.description = j.contains("description") ? string_field(j, "description", line) : "";
  if (auto it = j.find("aliases"); it != j.end()) {
    if (!it->is_array()) throw ParseError("aliases must be an array", line);
    for (const auto& a : *it) {
      if (!a.is_string()) throw ParseError("aliases must be strings", line);
      r.aliases.push_back(a.get<std::string>());
    }
  }
  if (auto it = j.find("triple_count"); it != j.end()) {
    if (!it->is_number_integer()) throw ParseError("triple_count must be an integer", line);
    r.triple_count = it->get<std::int64_t>();
    if (r.triple_count < 0) throw ParseError("triple_count must be >= 0", line);
  }
  return r;
}

std::vector<RelationLabel> read_catalog(const std::filesystem::path& path) {
  std::vector<RelationLabel> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    out.push_back(relation_from_json(j, ++line));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace relboot
