#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>

#include "evp/rational.hpp"
#include "evp/space.hpp"

namespace evp::jsonu {

using nlohmann::json;

inline json rat_to_json(const Rat& x) {
  return json{{"num", x.get_num().get_str()}, {"den", x.get_den().get_str()}};
}

inline Rat rat_from_json(const json& j) {
  if (!j.is_object() || !j.contains("num") || !j.contains("den"))
    throw std::invalid_argument("rational: expected {num, den} strings");
  Rat r(mpz_class(j.at("num").get<std::string>(), 10),
        mpz_class(j.at("den").get<std::string>(), 10));
  if (r.get_den() == 0) throw std::invalid_argument("rational: zero denominator");
  r.canonicalize();
  return r;
}

inline json ext_to_json(const ExtRat& x) {
  if (x.infinite) return json{{"inf", true}};
  return rat_to_json(x.value);
}

inline ExtRat ext_from_json(const json& j) {
  if (j.is_object() && j.contains("inf") && j.at("inf").get<bool>()) return ExtRat::inf();
  return ExtRat(rat_from_json(j));
}

inline json point_to_json(const Point& p) {
  if (p.is_rat()) return json{{"rat", rat_to_json(p.rat())}};
  if (p.is_seq()) {
    json a = json::array();
    for (auto v : p.seq()) a.push_back(v);
    return json{{"seq", a}};
  }
  if (p.is_pl()) {
    json a = json::array();
    for (const auto& kn : p.pl().knots)
      a.push_back(json{{"x", rat_to_json(kn.first)}, {"y", rat_to_json(kn.second)}});
    return json{{"pl", a}};
  }
  json a = json::array();
  for (const auto& q : p.tuple()) a.push_back(point_to_json(q));
  return json{{"tuple", a}};
}

inline Point point_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("point: expected object");
  if (j.contains("rat")) return Point(rat_from_json(j.at("rat")));
  if (j.contains("seq")) {
    Seq s;
    for (const auto& v : j.at("seq")) s.push_back(v.get<std::uint32_t>());
    return Point(s);
  }
  if (j.contains("pl")) {
    std::vector<std::pair<Rat, Rat>> knots;
    for (const auto& kn : j.at("pl"))
      knots.emplace_back(rat_from_json(kn.at("x")), rat_from_json(kn.at("y")));
    return Point(PLFunc(std::move(knots)));
  }
  if (j.contains("tuple")) {
    std::vector<Point> parts;
    for (const auto& q : j.at("tuple")) parts.push_back(point_from_json(q));
    return Point(std::move(parts));
  }
  throw std::invalid_argument("point: unknown representation");
}

inline json ball_to_json(const Ball& b) {
  return json{{"center", point_to_json(b.center)}, {"radius", rat_to_json(b.radius)}};
}

inline Ball ball_from_json(const json& j) {
  return Ball{point_from_json(j.at("center")), rat_from_json(j.at("radius"))};
}

inline json space_to_json(const Space& s) {
  switch (s.kind()) {
    case Kind::UnitInterval: return json{{"kind", "unit-interval"}};
    case Kind::ClosedInterval:
      return json{{"kind", "closed-interval"},
                  {"a", rat_to_json(s.lo())},
                  {"b", rat_to_json(s.hi())}};
    case Kind::Cantor: return json{{"kind", "cantor"}};
    case Kind::Baire: return json{{"kind", "baire"}};
    case Kind::C01: return json{{"kind", "c01"}};
    case Kind::Product: {
      json parts = json::array();
      for (const auto& p : s.parts()) parts.push_back(space_to_json(p));
      return json{{"kind", "product"}, {"parts", parts}};
    }
    case Kind::ClosedBall:
      return json{{"kind", "closed-ball"},
                  {"parent", space_to_json(s.parent())},
                  {"center", point_to_json(s.ball_center())},
                  {"radius", rat_to_json(s.ball_radius())}};
  }
  throw std::logic_error("space_to_json: unhandled kind");
}

inline Space space_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "unit-interval") return Space::unit_interval();
  if (kind == "closed-interval")
    return Space::closed_interval(rat_from_json(j.at("a")), rat_from_json(j.at("b")));
  if (kind == "cantor") return Space::cantor();
  if (kind == "baire") return Space::baire();
  if (kind == "c01") return Space::c01();
  if (kind == "product") {
    std::vector<Space> parts;
    for (const auto& p : j.at("parts")) parts.push_back(space_from_json(p));
    return Space::product(std::move(parts));
  }
  if (kind == "closed-ball")
    return Space::closed_ball(space_from_json(j.at("parent")),
                              point_from_json(j.at("center")),
                              rat_from_json(j.at("radius")));
  throw std::invalid_argument("space: unknown kind '" + kind + "'");
}

}  // namespace evp::jsonu

#include "evp/gadgets.hpp"

namespace evp::jsonu {

inline json tree_to_json(const TreeSpec& t) {
  json members = json::array();
  for (const auto& s : t.members) {
    json row = json::array();
    for (auto v : s) row.push_back(v);
    members.push_back(row);
  }
  return json{{"members", members},
              {"depth_bound", t.depth_bound},
              {"branching_bound", t.branching_bound}};
}

inline TreeSpec tree_from_json(const json& j) {
  std::vector<Seq> members;
  for (const auto& row : j.at("members")) {
    Seq s;
    for (const auto& v : row) s.push_back(v.get<std::uint32_t>());
    members.push_back(std::move(s));
  }
  return make_tree(std::move(members), j.at("depth_bound").get<std::uint32_t>(),
                   j.at("branching_bound").get<std::uint32_t>());
}

}  // namespace evp::jsonu
