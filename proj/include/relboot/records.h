#pragma once

// Line-delimited JSON record format for instances and auxiliary tables.
//
// One object per line with fields in this order:
//   {id, lang, text, relation, e1:{surface,start,end,etype}, e2:{...},
//    grade, source, provenance?}
// Unset entity types serialize as null. Output is UTF-8 with LF endings.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "relboot/core.h"

namespace relboot {

nlohmann::ordered_json to_json(const Instance& inst);
// Throws ParseError (carrying `line`) on missing or ill-typed fields.
Instance instance_from_json(const nlohmann::json& j, std::size_t line = 0);

std::string to_record_line(const Instance& inst);

std::vector<Instance> read_records(std::istream& in);
std::vector<Instance> read_records(const std::filesystem::path& path);
void write_records(std::span<const Instance> instances, std::ostream& out);
void write_records(std::span<const Instance> instances,
                   const std::filesystem::path& path);

// Generic JSONL reader; blank lines are skipped.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::vector<nlohmann::ordered_json>& rows,
                 const std::filesystem::path& path);

nlohmann::ordered_json to_json(const RelationLabel& rel);
RelationLabel relation_from_json(const nlohmann::json& j, std::size_t line = 0);
std::vector<RelationLabel> read_catalog(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace relboot
