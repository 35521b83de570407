#include "relboot/markup.h"

#include <algorithm>
#include <vector>

#include "relboot/unicode.h"

namespace relboot {
namespace {

struct Marker {
  enum class Type { kCls, kSep, kLang, kEntityOpen, kEntityClose, kTypeOpen, kTypeClose };
  Type type;
  int role = 0;  // 1 or 2 for entity/type markers
  std::string payload;
};

bool starts_with(std::string_view s, std::string_view p) {
  return s.substr(0, p.size()) == p;
}

std::optional<Marker> classify(std::string_view tok) {
  using T = Marker::Type;
  if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']') return std::nullopt;
  auto body = tok.substr(1, tok.size() - 2);
  if (body == "CLS") return Marker{T::kCls, 0, {}};
  if (body == "SEP") return Marker{T::kSep, 0, {}};
  if (starts_with(body, "L=") && body.size() > 2) {
    return Marker{T::kLang, 0, std::string(body.substr(2))};
  }
  bool closing = false;
  if (body.front() == '/') {
    closing = true;
    body.remove_prefix(1);
  }
  if (body == "E1" || body == "E2") {
    return Marker{closing ? T::kEntityClose : T::kEntityOpen, body[1] - '0', {}};
  }
  if ((starts_with(body, "ET1=") || starts_with(body, "ET2=")) && body.size() > 4) {
    return Marker{closing ? T::kTypeClose : T::kTypeOpen, body[2] - '0',
                  std::string(body.substr(4))};
  }
  return std::nullopt;
}

std::string type_marker(int role, EntityType t, bool closing) {
  return std::string(closing ? "[/ET" : "[ET") + char('0' + role) + "=" +
         std::string(to_string(t)) + "]";
}

std::string open_markers(int role, const EntityMention& m, MarkerKind kind) {
  std::string e = std::string("[E") + char('0' + role) + "]";
  switch (kind) {
    case MarkerKind::kES: return e;
    case MarkerKind::kET: return type_marker(role, *m.etype, false);
    case MarkerKind::kEST: return e + " " + type_marker(role, *m.etype, false);
  }
  return e;
}

std::string close_markers(int role, const EntityMention& m, MarkerKind kind) {
  std::string e = std::string("[/E") + char('0' + role) + "]";
  switch (kind) {
    case MarkerKind::kES: return e;
    case MarkerKind::kET: return type_marker(role, *m.etype, true);
    case MarkerKind::kEST: return type_marker(role, *m.etype, true) + " " + e;
  }
  return e;
}

}  // namespace

std::string_view to_string(MarkerKind k) {
  switch (k) {
    case MarkerKind::kES: return "es";
    case MarkerKind::kET: return "et";
    case MarkerKind::kEST: return "est";
  }
  return "?";
}

std::optional<MarkerKind> parse_marker_kind(std::string_view s) {
  if (s == "es") return MarkerKind::kES;
  if (s == "et") return MarkerKind::kET;
  if (s == "est") return MarkerKind::kEST;
  return std::nullopt;
}

bool is_marker_token(std::string_view token) { return classify(token).has_value(); }

std::string render_markup(const Instance& inst, MarkupScheme scheme) {
  if (auto v = validate_instance(inst); !v.empty()) {
    throw std::invalid_argument("render_markup: invalid instance " + inst.id + ": " + v.front());
  }
  if (scheme.kind != MarkerKind::kES && (!inst.e1.etype || !inst.e2.etype)) {
    throw std::invalid_argument("render_markup: scheme requires entity types on both mentions");
  }
  for (const auto& tok : split_whitespace(inst.text)) {
    if (is_marker_token(tok)) {
      throw std::invalid_argument("render_markup: text token collides with marker syntax: " + tok);
    }
  }

  auto text = utf8_decode(inst.text);
  const EntityMention* first = &inst.e1;
  const EntityMention* second = &inst.e2;
  int first_role = 1, second_role = 2;
  if (inst.e2.span.start < inst.e1.span.start) {
    std::swap(first, second);
    std::swap(first_role, second_role);
  }
  auto piece = [&](std::size_t a, std::size_t b) {
    return utf8_encode(std::u32string_view(text).substr(a, b - a));
  };
  std::string body;
  body += piece(0, first->span.start);
  body += " " + open_markers(first_role, *first, scheme.kind) + " ";
  body += piece(first->span.start, first->span.end);
  body += " " + close_markers(first_role, *first, scheme.kind) + " ";
  body += piece(first->span.end, second->span.start);
  body += " " + open_markers(second_role, *second, scheme.kind) + " ";
  body += piece(second->span.start, second->span.end);
  body += " " + close_markers(second_role, *second, scheme.kind) + " ";
  body += piece(second->span.end, text.size());

  std::string out = "[CLS]";
  if (scheme.language_flag) out += " [L=" + inst.lang + "]";
  out += " " + collapse_whitespace(body) + " [SEP]";
  return out;
}

ParsedMarkup parse_markup(std::string_view s) {
  using T = Marker::Type;
  auto toks = split_whitespace(s);
  if (toks.size() < 2) throw MarkupError("input too short", 0);
  if (toks.front() != "[CLS]") throw MarkupError("expected [CLS]", 0);
  if (toks.back() != "[SEP]") throw MarkupError("expected [SEP]", toks.size() - 1);

  ParsedMarkup out;
  std::size_t i = 1;
  if (auto m = classify(toks[1]); m && m->type == T::kLang) {
    out.lang = m->payload;
    i = 2;
  }

  struct Open {
    Marker m;
    std::size_t token;
    std::size_t char_start;
    std::size_t words_inside = 0;
  };
  std::vector<Open> stack;
  bool seen_entity[3] = {false, false, false};
  bool seen_typed[3] = {false, false, false};
  bool has_entity_marker[3] = {false, false, false};
  std::optional<Span> spans[3];
  std::optional<EntityType> types[3];

  std::size_t char_len = 0;  // scalar length of out.text so far
  const std::size_t last = toks.size() - 1;
  for (; i < last; ++i) {
    const auto& tok = toks[i];
    auto m = classify(tok);
    if (!m) {
      if (!out.text.empty()) {
        out.text.push_back(' ');
        ++char_len;
      }
      for (auto& o : stack) {
        if (o.words_inside == 0) o.char_start = char_len;
        ++o.words_inside;
      }
      out.text += tok;
      char_len += utf8_length(tok);
      continue;
    }
    switch (m->type) {
      case T::kCls:
      case T::kSep:
      case T::kLang:
        throw MarkupError("unexpected " + tok, i);
      case T::kEntityOpen:
        if (!stack.empty()) throw MarkupError("nested or interleaved entity marker " + tok, i);
        if (seen_entity[m->role]) throw MarkupError("duplicate " + tok, i);
        has_entity_marker[m->role] = true;
        stack.push_back({*m, i, char_len});
        break;
      case T::kTypeOpen: {
        bool inside_entity = stack.size() == 1 && stack[0].m.type == T::kEntityOpen &&
                             stack[0].m.role == m->role && stack[0].token == i - 1;
        if (!stack.empty() && !inside_entity) {
          throw MarkupError("nested or interleaved type marker " + tok, i);
        }
        if (seen_entity[m->role] && !inside_entity) throw MarkupError("duplicate " + tok, i);
        auto t = parse_entity_type(m->payload);
        if (!t) throw MarkupError("unknown entity type " + m->payload, i);
        types[m->role] = t;
        stack.push_back({*m, i, char_len});
        break;
      }
      case T::kEntityClose:
      case T::kTypeClose: {
        T expect = m->type == T::kEntityClose ? T::kEntityOpen : T::kTypeOpen;
        if (stack.empty() || stack.back().m.type != expect || stack.back().m.role != m->role ||
            (expect == T::kTypeOpen && stack.back().m.payload != m->payload)) {
          throw MarkupError("interleaved or unbalanced closing marker " + tok, i);
        }
        Open o = stack.back();
        stack.pop_back();
        if (o.words_inside == 0) throw MarkupError("empty entity span", i);
        Span span{o.char_start, char_len};
        if (spans[m->role] && !(*spans[m->role] == span)) {
          throw MarkupError("entity and type markers disagree", i);
        }
        spans[m->role] = span;
        if (m->type == T::kTypeClose) {
          seen_typed[m->role] = true;
          if (stack.empty()) seen_entity[m->role] = true;
        } else {
          seen_entity[m->role] = true;
          // EST requires the type markers to hug the entity markers.
          if (seen_typed[m->role] && toks[i - 1].rfind("[/ET", 0) != 0) {
            throw MarkupError("type marker does not enclose the whole entity", i);
          }
        }
        break;
      }
    }
  }
  if (!stack.empty()) throw MarkupError("unclosed marker " + toks[stack.back().token], stack.back().token);
  for (int r = 1; r <= 2; ++r) {
    if (!seen_entity[r]) throw MarkupError("missing entity " + std::to_string(r) + " markers", last);
  }
  // Determine scheme; both entities must agree.
  auto kind_of = [&](int r) {
    if (seen_typed[r] && has_entity_marker[r]) return MarkerKind::kEST;
    if (seen_typed[r]) return MarkerKind::kET;
    return MarkerKind::kES;
  };
  auto k1 = kind_of(1), k2 = kind_of(2);
  if (k1 != k2) throw MarkupError("entities use different marker schemes", last);
  out.kind = k1;
  out.e1 = *spans[1];
  out.e2 = *spans[2];
  out.e1_type = types[1];
  out.e2_type = types[2];
  return out;
}

std::size_t lexical_distance(const Instance& inst) {
  const Span& a = inst.e1.span.start <= inst.e2.span.start ? inst.e1.span : inst.e2.span;
  const Span& b = inst.e1.span.start <= inst.e2.span.start ? inst.e2.span : inst.e1.span;
  if (a.end > b.start) return 0;
  auto text = utf8_decode(inst.text);
  std::size_t n = 0;
  for (auto t : whitespace_tokens(text)) {
    if (t.start >= a.end && t.end <= b.start) ++n;
  }
  return n;
}

}  // namespace relboot
