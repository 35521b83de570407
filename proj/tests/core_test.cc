#include <doctest.h>

#include <sstream>

#include "relboot/errors.h"
#include "relboot/records.h"
#include "test_util.h"

using namespace relboot;

namespace {

bool has_violation(const Instance& inst, const std::string& needle) {
  for (const auto& v : validate_instance(inst)) {
    if (v.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("unicode helpers count scalar values") {
  std::string s = "मिशेल ओबामा";
  CHECK(utf8_length(s) == 11);
  CHECK(utf8_decode(s).size() == 11);
  CHECK(utf8_encode(utf8_decode(s)) == s);
  CHECK(utf8_slice(s, 6, 11) == "ओबामा");
  CHECK(split_whitespace("  a\tb c  ").size() == 3);
  CHECK(split_whitespace("a \xC2\xA0 b").size() == 2);
  CHECK(collapse_whitespace("  a \n\t b  ") == "a b");
  CHECK_THROWS_AS(utf8_decode("\xFF"), std::invalid_argument);
  CHECK_THROWS_AS(utf8_decode("\xE0\xA4"), std::invalid_argument);
}

TEST_CASE("validate_instance accepts a well-formed instance") {
  CHECK(validate_instance(testing::spouse_sample()).empty());
}

TEST_CASE("validate_instance reports span out of bounds") {
  auto inst = testing::spouse_sample();
  inst.e2.span.end = utf8_length(inst.text) + 3;
  CHECK(has_violation(inst, "span out of bounds"));
}

TEST_CASE("validate_instance reports surface mismatch after a one-character mutation") {
  auto inst = testing::spouse_sample();
  auto u = utf8_decode(inst.e1.surface);
  u[0] = U'x';
  inst.e1.surface = utf8_encode(u);
  CHECK(has_violation(inst, "surface mismatch"));
}

TEST_CASE("validate_instance enumerated mutations") {
  auto base = testing::spouse_sample();
  REQUIRE(is_valid(base));

  SUBCASE("overlap and nesting are both forbidden") {
    auto inst = base;
    inst.e2 = make_mention(inst.text, inst.e1.span.start + 1, inst.e1.span.end + 2);
    CHECK(has_violation(inst, "spans overlap"));
    inst.e2 = make_mention(inst.text, inst.e1.span.start + 1, inst.e1.span.end - 1);
    CHECK(has_violation(inst, "spans overlap"));
  }
  SUBCASE("empty span") {
    auto inst = base;
    inst.e1 = make_mention(inst.text, 3, 3);
    CHECK(has_violation(inst, "empty span"));
  }
  SUBCASE("silver needs provenance") {
    auto inst = base;
    inst.grade = Grade::kSilver;
    CHECK(has_violation(inst, "provenance"));
    inst.provenance = Provenance{"en-1", "stub"};
    CHECK(is_valid(inst));
  }
  SUBCASE("unknown language, empty id and relation") {
    auto inst = base;
    inst.lang = "xx";
    inst.id.clear();
    inst.relation.clear();
    CHECK(validate_instance(inst).size() == 3);
  }
  SUBCASE("every single-offset shift of a span breaks validity") {
    for (int which = 0; which < 2; ++which) {
      for (int field = 0; field < 2; ++field) {
        for (int delta : {-1, 1}) {
          auto inst = base;
          auto& m = which == 0 ? inst.e1 : inst.e2;
          auto& off = field == 0 ? m.span.start : m.span.end;
          off = static_cast<std::size_t>(static_cast<long>(off) + delta);
          CHECK_FALSE(is_valid(inst));
        }
      }
    }
  }
}

TEST_CASE("records: write then read 100 instances re-writes byte-identically") {
  Rng rng(7);
  std::vector<Instance> insts;
  for (int i = 0; i < 100; ++i) {
    insts.push_back(testing::random_instance(rng, "i" + std::to_string(i), i % 3 != 0));
  }
  std::ostringstream first;
  write_records(insts, first);
  std::istringstream in(first.str());
  auto back = read_records(in);
  CHECK(back == insts);
  std::ostringstream second;
  write_records(back, second);
  CHECK(second.str() == first.str());
}

TEST_CASE("records: field order is stable") {
  auto line = to_record_line(testing::spouse_sample());
  auto pos = [&](const char* key) { return line.find(std::string("\"") + key + "\""); };
  CHECK(pos("id") < pos("lang"));
  CHECK(pos("lang") < pos("text"));
  CHECK(pos("text") < pos("relation"));
  CHECK(pos("relation") < pos("e1"));
  CHECK(pos("e1") < pos("e2"));
  CHECK(pos("e2") < pos("grade"));
  CHECK(pos("grade") < pos("source"));
  CHECK(line.find("provenance") == std::string::npos);
  CHECK(line.find("\"etype\":\"PERSON\"") != std::string::npos);
}

TEST_CASE("records: empty input gives empty sequence") {
  std::istringstream in("");
  CHECK(read_records(in).empty());
}

TEST_CASE("records: missing relation field is reported at its line") {
  std::string good = to_record_line(testing::spouse_sample());
  auto j = nlohmann::json::parse(good);
  j.erase("relation");
  std::istringstream in(good + "\n" + good + "\n" + j.dump() + "\n");
  try {
    read_records(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("relation") != std::string::npos);
  }
}

TEST_CASE("records: unknown language and malformed JSON are errors") {
  auto j = nlohmann::json::parse(to_record_line(testing::spouse_sample()));
  j["lang"] = "zz";
  std::istringstream bad_lang(j.dump() + "\n");
  CHECK_THROWS_AS(read_records(bad_lang), ParseError);
  std::istringstream bad_json("{\"id\": \n");
  CHECK_THROWS_AS(read_records(bad_json), ParseError);
}

TEST_CASE("entity pair key is unordered") {
  auto a = testing::spouse_sample();
  auto b = a;
  std::swap(b.e1, b.e2);
  CHECK(entity_pair_key(a) == entity_pair_key(b));
}
