#include "evp/space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evp {

// ---------------------------------------------------------------------------
// PLFunc

PLFunc::PLFunc(std::vector<std::pair<Rat, Rat>> k) : knots(std::move(k)) {
  if (knots.size() < 2) throw std::invalid_argument("PLFunc: need at least two knots");
  if (knots.front().first != 0 || knots.back().first != 1)
    throw std::invalid_argument("PLFunc: knots must span [0,1]");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i - 1].first < knots[i].first))
      throw std::invalid_argument("PLFunc: knot abscissae must increase strictly");
}

PLFunc PLFunc::constant(const Rat& value) {
  return PLFunc({{Rat(0), value}, {Rat(1), value}});
}

Rat PLFunc::eval(const Rat& t) const {
  if (t < 0 || t > 1) throw std::invalid_argument("PLFunc::eval: argument outside [0,1]");
  // first knot with x >= t
  std::size_t i = 1;
  while (knots[i].first < t) ++i;
  const auto& [x1, y1] = knots[i];
  if (x1 == t) return y1;
  const auto& [x0, y0] = knots[i - 1];
  return y0 + (y1 - y0) * (t - x0) / (x1 - x0);
}

PLFunc PLFunc::normalized() const {
  std::vector<std::pair<Rat, Rat>> out;
  out.push_back(knots.front());
  for (std::size_t i = 1; i + 1 < knots.size(); ++i) {
    const auto& [xa, ya] = out.back();
    const auto& [xb, yb] = knots[i];
    const auto& [xc, yc] = knots[i + 1];
    // keep the knot unless (xa,ya)-(xb,yb)-(xc,yc) are collinear
    if ((yb - ya) * (xc - xb) != (yc - yb) * (xb - xa)) out.push_back(knots[i]);
  }
  out.push_back(knots.back());
  PLFunc f;
  f.knots = std::move(out);
  return f;
}

Rat PLFunc::sup_diff(const PLFunc& f, const PLFunc& g) {
  Rat best(0);
  auto consider = [&](const Rat& t) {
    Rat d = rat_abs(f.eval(t) - g.eval(t));
    if (d > best) best = d;
  };
  for (const auto& kn : f.knots) consider(kn.first);
  for (const auto& kn : g.knots) consider(kn.first);
  return best;
}

Rat PLFunc::sup_abs_on(const Rat& l, const Rat& r) const {
  if (l > r || l < 0 || r > 1) throw std::invalid_argument("PLFunc::sup_abs_on: bad interval");
  Rat best = rat_abs(eval(l));
  Rat d = rat_abs(eval(r));
  if (d > best) best = d;
  for (const auto& [x, y] : knots)
    if (l < x && x < r) {
      d = rat_abs(y);
      if (d > best) best = d;
    }
  return best;
}

// ---------------------------------------------------------------------------
// Space factories

Space Space::unit_interval() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::UnitInterval;
  n->a = 0;
  n->b = 1;
  return Space(n);
}

Space Space::closed_interval(const Rat& a, const Rat& b) {
  if (a > b) throw std::invalid_argument("closed_interval: a > b");
  auto n = std::make_shared<Node>();
  n->kind = Kind::ClosedInterval;
  n->a = a;
  n->b = b;
  return Space(n);
}

Space Space::cantor() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Cantor;
  return Space(n);
}

Space Space::baire() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Baire;
  return Space(n);
}

Space Space::product(std::vector<Space> parts) {
  if (parts.empty()) throw std::invalid_argument("product: no components");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Product;
  n->parts = std::move(parts);
  return Space(n);
}

Space Space::c01() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::C01;
  return Space(n);
}

Space Space::closed_ball(const Space& parent, const Point& center, const Rat& radius) {
  if (radius <= 0) throw std::invalid_argument("closed_ball: radius must be positive");
  if (!parent.contains(center)) throw std::invalid_argument("closed_ball: center not in parent");
  auto n = std::make_shared<Node>();
  n->kind = Kind::ClosedBall;
  n->parent = std::make_shared<Space>(parent);
  n->center = center;
  n->radius = radius;
  return Space(n);
}

bool Space::compact() const {
  switch (kind()) {
    case Kind::UnitInterval:
    case Kind::ClosedInterval:
    case Kind::Cantor:
      return true;
    case Kind::Baire:
    case Kind::C01:
      return false;
    case Kind::Product:
      return std::all_of(parts().begin(), parts().end(),
                         [](const Space& s) { return s.compact(); });
    case Kind::ClosedBall:
      return parent().compact();
  }
  return false;
}

bool Space::contains(const Point& p) const {
  switch (kind()) {
    case Kind::UnitInterval:
    case Kind::ClosedInterval:
      return p.is_rat() && lo() <= p.rat() && p.rat() <= hi();
    case Kind::Cantor:
      if (!p.is_seq()) return false;
      return std::all_of(p.seq().begin(), p.seq().end(),
                         [](std::uint32_t v) { return v <= 1; });
    case Kind::Baire:
      return p.is_seq();
    case Kind::C01:
      return p.is_pl();
    case Kind::Product: {
      if (!p.is_tuple() || p.tuple().size() != parts().size()) return false;
      for (std::size_t i = 0; i < parts().size(); ++i)
        if (!parts()[i].contains(p.tuple()[i])) return false;
      return true;
    }
    case Kind::ClosedBall:
      return parent().contains(p) && dist(parent(), ball_center(), p) <= ball_radius();
  }
  return false;
}

std::string Space::describe() const {
  switch (kind()) {
    case Kind::UnitInterval: return "unit-interval";
    case Kind::ClosedInterval:
      return "closed-interval[" + rat_str(lo()) + "," + rat_str(hi()) + "]";
    case Kind::Cantor: return "cantor";
    case Kind::Baire: return "baire";
    case Kind::C01: return "c01";
    case Kind::Product: {
      std::string s = "product(";
      for (std::size_t i = 0; i < parts().size(); ++i) {
        if (i) s += ", ";
        s += parts()[i].describe();
      }
      return s + ")";
    }
    case Kind::ClosedBall:
      return "closed-ball(" + parent().describe() + ", r=" + rat_str(ball_radius()) + ")";
  }
  return "?";
}

bool Space::same_as(const Space& other) const {
  if (kind() != other.kind()) return false;
  switch (kind()) {
    case Kind::UnitInterval:
    case Kind::Cantor:
    case Kind::Baire:
    case Kind::C01:
      return true;
    case Kind::ClosedInterval:
      return lo() == other.lo() && hi() == other.hi();
    case Kind::Product: {
      if (parts().size() != other.parts().size()) return false;
      for (std::size_t i = 0; i < parts().size(); ++i)
        if (!parts()[i].same_as(other.parts()[i])) return false;
      return true;
    }
    case Kind::ClosedBall:
      return parent().same_as(other.parent()) &&
             ball_radius() == other.ball_radius() &&
             point_eq(parent(), ball_center(), other.ball_center());
  }
  return false;
}

// ---------------------------------------------------------------------------
// Metric

namespace {

Rat seq_dist(const Point& p, const Point& q) {
  std::size_t n = std::max(p.seq().size(), q.seq().size());
  for (std::size_t i = 0; i < n; ++i)
    if (p.seq_at(i) != q.seq_at(i)) return pow2(-static_cast<long>(i));
  return Rat(0);
}

}  // namespace

Rat dist(const Space& s, const Point& p, const Point& q) {
  switch (s.kind()) {
    case Kind::UnitInterval:
    case Kind::ClosedInterval:
      return rat_abs(p.rat() - q.rat());
    case Kind::Cantor:
    case Kind::Baire:
      return seq_dist(p, q);
    case Kind::C01:
      return PLFunc::sup_diff(p.pl(), q.pl());
    case Kind::Product: {
      Rat best(0);
      for (std::size_t i = 0; i < s.parts().size(); ++i) {
        Rat d = dist(s.parts()[i], p.tuple()[i], q.tuple()[i]);
        if (d > best) best = d;
      }
      return best;
    }
    case Kind::ClosedBall:
      return dist(s.parent(), p, q);
  }
  throw std::logic_error("dist: unhandled kind");
}

bool point_eq(const Space& s, const Point& p, const Point& q) {
  return dist(s, p, q) == 0;
}

bool in_open_ball(const Space& s, const Ball& b, const Point& p) {
  return dist(s, b.center, p) < b.radius;
}

bool in_closed_ball(const Space& s, const Ball& b, const Point& p) {
  return dist(s, b.center, p) <= b.radius;
}

bool strictly_inside(const Space& s, const Ball& inner, const Ball& outer) {
  return dist(s, inner.center, outer.center) + inner.radius < outer.radius;
}

// ---------------------------------------------------------------------------
// Nets

namespace {

// ceil of a non-negative rational
long rat_ceil_long(const Rat& x) {
  mpz_class q, r;
  mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), x.get_num().get_mpz_t(),
              x.get_den().get_mpz_t());
  if (r != 0) q += 1;
  if (!q.fits_slong_p()) throw std::overflow_error("net: resolution too fine");
  return q.get_si();
}

struct IntervalNetSpec {
  Rat a, b;   // clipped range
  long m;     // number of steps (grid has m+1 points, or 1 when a == b)
};

IntervalNetSpec interval_spec(const Space& s, int k, const Region* region) {
  Rat a = s.lo(), b = s.hi();
  if (region && region->ball) {
    const Rat& c = region->ball->center.rat();
    a = rat_max(a, c - region->ball->radius);
    b = rat_min(b, c + region->ball->radius);
    if (a > b) throw std::invalid_argument("net: region ball misses the interval");
  }
  if (a == b) return {a, b, 0};
  long m = rat_ceil_long((b - a) * pow2(k));
  return {a, b, std::max(m, 1L)};
}

void seq_tuples(std::uint32_t branching, std::uint32_t len, Seq& cur,
                std::vector<Point>& out) {
  if (cur.size() == len) {
    out.emplace_back(cur);
    return;
  }
  for (std::uint32_t v = 0; v < branching; ++v) {
    cur.push_back(v);
    seq_tuples(branching, len, cur, out);
    cur.pop_back();
  }
}

std::vector<Point> product_net(const Space& s, int k, const Region* region);

std::vector<Point> net_impl(const Space& s, int k, const Region* region) {
  if (region && region->explicit_net) return region->explicit_net->points;
  switch (s.kind()) {
    case Kind::UnitInterval:
    case Kind::ClosedInterval: {
      auto spec = interval_spec(s, k, region);
      std::vector<Point> out;
      out.reserve(static_cast<std::size_t>(spec.m) + 1);
      if (spec.m == 0) {
        out.emplace_back(spec.a);
        return out;
      }
      Rat step = (spec.b - spec.a) / spec.m;
      for (long j = 0; j <= spec.m; ++j) out.emplace_back(spec.a + step * j);
      return out;
    }
    case Kind::Cantor: {
      std::vector<Point> out;
      Seq cur;
      seq_tuples(2, static_cast<std::uint32_t>(std::max(k, 0)), cur, out);
      if (region && region->ball) {
        std::vector<Point> kept;
        for (auto& p : out)
          if (in_closed_ball(s, *region->ball, p)) kept.push_back(std::move(p));
        return kept;
      }
      return out;
    }
    case Kind::Baire: {
      if (!region || !region->baire)
        throw std::invalid_argument("net: baire requires branching/depth bounds");
      std::uint32_t len = std::min<std::uint32_t>(
          static_cast<std::uint32_t>(std::max(k, 0)), region->baire->depth);
      std::vector<Point> out;
      Seq cur;
      seq_tuples(region->baire->branching, len, cur, out);
      if (region->ball) {
        std::vector<Point> kept;
        for (auto& p : out)
          if (in_closed_ball(s, *region->ball, p)) kept.push_back(std::move(p));
        return kept;
      }
      return out;
    }
    case Kind::Product:
      return product_net(s, k, region);
    case Kind::C01:
      throw std::invalid_argument("net: c01 has nets only through an explicit region net");
    case Kind::ClosedBall: {
      // Rebuild as a region restriction of the parent; a caller-supplied
      // ball is applied as an extra filter afterwards.
      Region sub = region ? *region : Region{};
      sub.ball = Ball{s.ball_center(), s.ball_radius()};
      auto pts = net_impl(s.parent(), k, &sub);
      if (region && region->ball) {
        std::vector<Point> kept;
        for (auto& p : pts)
          if (in_closed_ball(s.parent(), *region->ball, p)) kept.push_back(std::move(p));
        return kept;
      }
      return pts;
    }
  }
  throw std::logic_error("net: unhandled kind");
}

std::vector<Point> product_net(const Space& s, int k, const Region* region) {
  std::vector<std::vector<Point>> comp;
  comp.reserve(s.parts().size());
  for (std::size_t i = 0; i < s.parts().size(); ++i) {
    Region sub;
    if (region && region->ball)
      sub.ball = Ball{region->ball->center.tuple()[i], region->ball->radius};
    if (region && region->baire) sub.baire = region->baire;
    comp.push_back(net_impl(s.parts()[i], k, &sub));
  }
  std::vector<Point> out;
  std::vector<std::size_t> idx(comp.size(), 0);
  for (;;) {
    std::vector<Point> parts;
    parts.reserve(comp.size());
    for (std::size_t i = 0; i < comp.size(); ++i) parts.push_back(comp[i][idx[i]]);
    out.emplace_back(std::move(parts));
    std::size_t i = comp.size();
    while (i > 0) {
      --i;
      if (++idx[i] < comp[i].size()) break;
      idx[i] = 0;
      if (i == 0) return out;
    }
  }
}

}  // namespace

std::vector<Point> net(const Space& s, int k, const Region* region) {
  auto out = net_impl(s, k, region);
  if (out.empty()) throw std::invalid_argument("net: empty (region excludes all points)");
  return out;
}

Rat net_covering_radius(const Space& s, int k, const Region* region) {
  if (region && region->explicit_net) return region->explicit_net->covering_radius;
  switch (s.kind()) {
    case Kind::UnitInterval:
    case Kind::ClosedInterval: {
      auto spec = interval_spec(s, k, region);
      if (spec.m == 0) return Rat(0);
      return (spec.b - spec.a) / (2 * spec.m);
    }
    case Kind::Cantor:
      return pow2(-std::max(k, 0));
    case Kind::Baire: {
      if (!region || !region->baire)
        throw std::invalid_argument("net_covering_radius: baire requires bounds");
      std::uint32_t len = std::min<std::uint32_t>(
          static_cast<std::uint32_t>(std::max(k, 0)), region->baire->depth);
      return pow2(-static_cast<long>(len));
    }
    case Kind::Product: {
      Rat best(0);
      for (std::size_t i = 0; i < s.parts().size(); ++i) {
        Region sub;
        if (region && region->ball)
          sub.ball = Ball{region->ball->center.tuple()[i], region->ball->radius};
        if (region && region->baire) sub.baire = region->baire;
        Rat r = net_covering_radius(s.parts()[i], k, &sub);
        if (r > best) best = r;
      }
      return best;
    }
    case Kind::C01:
      throw std::invalid_argument("net_covering_radius: c01 requires an explicit net");
    case Kind::ClosedBall: {
      Region sub = region ? *region : Region{};
      sub.ball = Ball{s.ball_center(), s.ball_radius()};
      return net_covering_radius(s.parent(), k, &sub);
    }
  }
  throw std::logic_error("net_covering_radius: unhandled kind");
}

}  // namespace evp
