#include <doctest.h>

#include <map>
#include <tuple>

#include "relboot/markup.h"
#include "test_util.h"

using namespace relboot;

TEST_CASE("render ES on the annotated spouse sample") {
  auto s = render_markup(testing::spouse_sample(), {MarkerKind::kES, false});
  CHECK(s.rfind("[CLS] [E1] मिशेल ओबामा [/E1] अमेरिका की पूर्व राष्ट्रपति [E2] बराक ओबामा [/E2] की पत्नी", 0) == 0);
  CHECK(s.size() > 6);
  CHECK(s.substr(s.size() - 6) == " [SEP]");
}

TEST_CASE("language flag is the second token") {
  auto s = render_markup(testing::spouse_sample(), {MarkerKind::kES, true});
  auto toks = split_whitespace(s);
  CHECK(toks[0] == "[CLS]");
  CHECK(toks[1] == "[L=hi]");
}

TEST_CASE("EST nests the type marker inside the entity marker") {
  auto s = render_markup(testing::spouse_sample(), {MarkerKind::kEST, false});
  CHECK(s.find("[E1] [ET1=PERSON] मिशेल ओबामा [/ET1=PERSON] [/E1]") != std::string::npos);
  CHECK(s.find("[E2] [ET2=PERSON] बराक ओबामा [/ET2=PERSON] [/E2]") != std::string::npos);
  auto et = render_markup(testing::spouse_sample(), {MarkerKind::kET, false});
  CHECK(et.find("[ET1=PERSON] मिशेल ओबामा [/ET1=PERSON]") != std::string::npos);
  CHECK(et.find("[E1]") == std::string::npos);
}

TEST_CASE("render errors") {
  auto inst = testing::spouse_sample();
  inst.e1.etype.reset();
  CHECK_NOTHROW(render_markup(inst, {MarkerKind::kES, false}));
  CHECK_THROWS_AS(render_markup(inst, {MarkerKind::kET, false}), std::invalid_argument);
  CHECK_THROWS_AS(render_markup(inst, {MarkerKind::kEST, false}), std::invalid_argument);

  auto overlap = testing::spouse_sample();
  overlap.e2 = make_mention(overlap.text, overlap.e1.span.start, overlap.e1.span.end + 2);
  CHECK_THROWS_AS(render_markup(overlap, {MarkerKind::kES, false}), std::invalid_argument);

  auto collide = testing::instance_with("a [E1] b c", "b", "c", "en");
  CHECK_THROWS_AS(render_markup(collide, {MarkerKind::kES, false}), std::invalid_argument);
}

TEST_CASE("parse rejects interleaved markers") {
  try {
    parse_markup("[CLS] [E1] a [E2] b [/E1] c [/E2] [SEP]");
    FAIL("expected MarkupError");
  } catch (const MarkupError& e) {
    CHECK(e.position() == 3);
  }
  CHECK_THROWS_AS(parse_markup("[CLS] [E1] a [E2] b [/E2] [/E1] [SEP]"), MarkupError);
  CHECK_THROWS_AS(parse_markup("[CLS] [E1] a [/E1] b [SEP]"), MarkupError);
  CHECK_THROWS_AS(parse_markup("[CLS] [E1] a [/E1] [E2] b [SEP]"), MarkupError);
  CHECK_THROWS_AS(parse_markup("[E1] a [/E1] [E2] b [/E2]"), MarkupError);
  CHECK_THROWS_AS(parse_markup("[CLS] [E1] [/E1] [E2] b [/E2] [SEP]"), MarkupError);
  CHECK_THROWS_AS(parse_markup("[CLS] [ET1=PERSON] a [/ET1=ORG] [ET2=ORG] b [/ET2=ORG] [SEP]"),
                  MarkupError);
  CHECK_THROWS_AS(parse_markup("[CLS] [E1] a [/E1] [ET2=ORG] b [/ET2=ORG] [SEP]"), MarkupError);
  CHECK_THROWS_AS(parse_markup("[CLS] [E1] [ET1=PERSON] a [/ET1=PERSON] x [/E1] [E2] [ET2=ORG] b "
                               "[/ET2=ORG] [/E2] [SEP]"),
                  MarkupError);
}

TEST_CASE("parse recovers text, spans, types and language") {
  auto p = parse_markup("[CLS] [L=en] x [E2] [ET2=ORG] b c [/ET2=ORG] [/E2] y [E1] [ET1=PERSON] "
                        "d [/ET1=PERSON] [/E1] [SEP]");
  CHECK(p.text == "x b c y d");
  CHECK(p.e2 == Span{2, 5});
  CHECK(p.e1 == Span{8, 9});
  CHECK(p.e1_type == EntityType::kPerson);
  CHECK(p.e2_type == EntityType::kOrg);
  CHECK(p.lang == "en");
  CHECK(p.kind == MarkerKind::kEST);
}

TEST_CASE("parse . render is the identity on canonical random instances") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    auto inst = testing::random_instance(rng, "r" + std::to_string(i));
    for (auto kind : {MarkerKind::kES, MarkerKind::kET, MarkerKind::kEST}) {
      for (bool flag : {false, true}) {
        auto s = render_markup(inst, {kind, flag});
        auto p = parse_markup(s);
        REQUIRE(p.text == inst.text);
        CHECK(p.e1 == inst.e1.span);
        CHECK(p.e2 == inst.e2.span);
        CHECK(p.kind == kind);
        CHECK(p.lang.has_value() == flag);
        if (kind != MarkerKind::kES) {
          CHECK(p.e1_type == inst.e1.etype);
          CHECK(p.e2_type == inst.e2.etype);
        }
      }
    }
  }
}

TEST_CASE("render is injective per scheme on random instances") {
  Rng rng(5);
  std::map<std::string, std::tuple<std::string, Span, Span>> seen;
  for (int i = 0; i < 400; ++i) {
    auto inst = testing::random_instance(rng, "r", false);
    auto s = render_markup(inst, {MarkerKind::kES, false});
    auto key = std::make_tuple(inst.text, inst.e1.span, inst.e2.span);
    auto [it, inserted] = seen.emplace(s, key);
    if (!inserted) {
      CHECK(std::get<0>(it->second) == inst.text);
      CHECK(std::get<1>(it->second) == inst.e1.span);
      CHECK(std::get<2>(it->second) == inst.e2.span);
    }
  }
}

TEST_CASE("mid-word spans normalize to space-separated text") {
  auto inst = testing::instance_with("ab, cd", "ab", "cd", "en");
  auto s = render_markup(inst, {MarkerKind::kES, false});
  CHECK(s == "[CLS] [E1] ab [/E1] , [E2] cd [/E2] [SEP]");
  auto p = parse_markup(s);
  CHECK(p.text == "ab , cd");
  CHECK(utf8_slice(p.text, p.e1.start, p.e1.end) == "ab");
  CHECK(utf8_slice(p.text, p.e2.start, p.e2.end) == "cd");
}

TEST_CASE("lexical distance reproduces the published examples") {
  auto spouse = testing::spouse_example();
  CHECK(lexical_distance(spouse) == 1);
  auto award = testing::award_example();
  REQUIRE(is_valid(award));
  CHECK(lexical_distance(award) == 24);
}

TEST_CASE("lexical distance edge cases") {
  CHECK(lexical_distance(testing::instance_with("a b c", "a", "b", "en")) == 0);
  CHECK(lexical_distance(testing::instance_with("ab", "a", "b", "en")) == 0);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto inst = testing::random_instance(rng, "s");
    auto swapped = inst;
    std::swap(swapped.e1, swapped.e2);
    CHECK(lexical_distance(inst) == lexical_distance(swapped));
  }
}
