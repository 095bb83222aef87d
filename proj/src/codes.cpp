#include "evp/codes.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json_util.hpp"

namespace evp {
namespace {

using jsonu::json;

/// Smallest integer s with 2^s >= x (x > 0).
long ceil_log2(const Rat& x) {
  if (x <= 0) throw std::invalid_argument("ceil_log2: positive input required");
  long s = 0;
  Rat p(1);
  if (x <= 1) {
    while (p / 2 >= x) {
      p /= 2;
      --s;
    }
    return s;
  }
  while (p < x) {
    p *= 2;
    ++s;
  }
  return s;
}

/// A representable point of the space, used as a default query center.
Point canonical_point(const Space& s) {
  switch (s.kind()) {
    case Kind::UnitInterval: return Point(Rat(0));
    case Kind::ClosedInterval: return Point(s.lo());
    case Kind::Cantor:
    case Kind::Baire: return Point(Seq{});
    case Kind::C01: return Point(PLFunc::constant(Rat(0)));
    case Kind::Product: {
      std::vector<Point> parts;
      for (const auto& p : s.parts()) parts.push_back(canonical_point(p));
      return Point(std::move(parts));
    }
    case Kind::ClosedBall: return s.ball_center();
  }
  throw std::logic_error("canonical_point: unhandled kind");
}

/// Upper bound on the diameter, when the kind has one.
std::optional<Rat> diameter_bound(const Space& s) {
  switch (s.kind()) {
    case Kind::UnitInterval: return Rat(1);
    case Kind::ClosedInterval: return Rat(s.hi() - s.lo());
    case Kind::Cantor:
    case Kind::Baire: return Rat(1);
    case Kind::C01: return std::nullopt;
    case Kind::Product: {
      Rat m(0);
      for (const auto& p : s.parts()) {
        auto d = diameter_bound(p);
        if (!d) return std::nullopt;
        m = rat_max(m, *d);
      }
      return m;
    }
    case Kind::ClosedBall: return Rat(2 * s.ball_radius());
  }
  return std::nullopt;
}

/// Level-by-level ball sweep shared by the item enumerations: at level L
/// the balls are centered on the 2^-L-net and have twice the covering
/// radius, so each level covers the (regioned) space.
std::vector<Ball> enum_balls(const Space& s, const Region* region, int levels,
                             long budget) {
  std::vector<Ball> out;
  for (int L = 0; L <= levels && static_cast<long>(out.size()) < budget; ++L) {
    std::vector<Point> pts;
    Rat cov;
    try {
      pts = net(s, L, region);
      cov = net_covering_radius(s, L, region);
    } catch (const std::exception&) {
      break;  // the kind needs a region it was not given
    }
    Rat r = cov > 0 ? Rat(cov * 2) : pow2(-L);
    for (const auto& p : pts) {
      out.push_back(Ball{p, r});
      if (static_cast<long>(out.size()) >= budget) break;
    }
    if (region && region->explicit_net) break;  // a supplied net has one level
  }
  return out;
}

std::optional<json> sub_serial(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return json::parse(s);
}

// ---------------------------------------------------------------------------
// Continuous backends.

class ConstCont final : public ContBackend {
 public:
  ConstCont(Space s, Rat v) : sp_(std::move(s)), v_(std::move(v)) {}
  const Space& space() const override { return sp_; }
  Bracket enclosure(const Ball& ball) const override {
    (void)ball;
    return Bracket::exact(v_);
  }
  Modulus modulus() const override { return Modulus{-60}; }
  std::optional<Rat> value_exact(const Point& x) const override {
    (void)x;
    return v_;
  }
  bool exact_ranges() const override { return true; }
  std::optional<std::pair<Point, Rat>> range_min_point(const Ball& ball) const override {
    return std::make_pair(ball.center, v_);
  }
  std::string name() const override { return "const"; }

 private:
  Space sp_;
  Rat v_;
};

class PLCont final : public ContBackend {
 public:
  PLCont(Space s, std::vector<std::pair<Rat, Rat>> knots)
      : sp_(std::move(s)), knots_(std::move(knots)) {
    Rat lip(0);
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
      Rat slope = rat_abs((knots_[i + 1].second - knots_[i].second) /
                          (knots_[i + 1].first - knots_[i].first));
      lip = rat_max(lip, slope);
    }
    shift_ = lip > 0 ? ceil_log2(lip) : -60;
  }

  Rat eval_at(const Rat& t) const {
    if (t <= knots_.front().first) return knots_.front().second;
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
      const auto& a = knots_[i];
      const auto& b = knots_[i + 1];
      if (t <= b.first)
        return a.second + (b.second - a.second) * (t - a.first) / (b.first - a.first);
    }
    return knots_.back().second;
  }

  const Space& space() const override { return sp_; }

  Bracket enclosure(const Ball& ball) const override {
    const Rat& c = ball.center.rat();
    Rat l = rat_max(sp_.lo(), Rat(c - ball.radius));
    Rat r = rat_min(sp_.hi(), Rat(c + ball.radius));
    auto mn = min_on(l, r);
    Rat hi = rat_max(eval_at(l), eval_at(r));
    for (const auto& kn : knots_)
      if (l < kn.first && kn.first < r) hi = rat_max(hi, kn.second);
    return Bracket(mn.second, ExtRat(hi));
  }

  Modulus modulus() const override { return Modulus{shift_}; }
  std::optional<Rat> value_exact(const Point& x) const override {
    return eval_at(x.rat());
  }
  bool exact_ranges() const override { return true; }
  std::optional<std::pair<Point, Rat>> range_min_point(const Ball& ball) const override {
    const Rat& c = ball.center.rat();
    Rat l = rat_max(sp_.lo(), Rat(c - ball.radius));
    Rat r = rat_min(sp_.hi(), Rat(c + ball.radius));
    auto mn = min_on(l, r);
    return std::make_pair(Point(mn.first), mn.second);
  }
  std::string name() const override { return "pl"; }

 private:
  /// Minimum over [l, r] with a minimizer; exact because the function is
  /// piecewise linear (extrema at knots and interval ends).
  std::pair<Rat, Rat> min_on(const Rat& l, const Rat& r) const {
    Rat at = l;
    Rat best = eval_at(l);
    Rat vr = eval_at(r);
    if (vr < best) {
      best = vr;
      at = r;
    }
    for (const auto& kn : knots_)
      if (l < kn.first && kn.first < r && kn.second < best) {
        best = kn.second;
        at = kn.first;
      }
    return {at, best};
  }

  Space sp_;
  std::vector<std::pair<Rat, Rat>> knots_;
  long shift_;
};

class SampledCont final : public ContBackend {
 public:
  SampledCont(Space s, std::vector<std::pair<Point, Rat>> samples, Modulus mod)
      : sp_(std::move(s)), samples_(std::move(samples)), mod_(mod) {}

  const Space& space() const override { return sp_; }

  Bracket enclosure(const Ball& ball) const override {
    std::optional<Bracket> acc;
    for (const auto& sm : samples_) {
      Rat reach = dist(sp_, ball.center, sm.first) + ball.radius;
      ExtRat osc = mod_.osc_bound(reach);
      if (osc.infinite) continue;
      Bracket contrib(Rat(sm.second - osc.value), ExtRat(sm.second + osc.value));
      if (!acc)
        acc = contrib;
      else
        acc->intersect(contrib);
    }
    if (!acc)
      throw std::logic_error(
          "cont_from_samples: sample set too sparse to bound a ball of radius " +
          rat_str(ball.radius));
    return *acc;
  }

  Modulus modulus() const override { return mod_; }
  std::optional<Rat> value_exact(const Point& x) const override {
    for (const auto& sm : samples_)
      if (point_eq(sp_, x, sm.first)) return sm.second;
    return std::nullopt;
  }
  std::string name() const override { return "sampled"; }

 private:
  Space sp_;
  std::vector<std::pair<Point, Rat>> samples_;
  Modulus mod_;
};

class PatchCont final : public ContBackend {
 public:
  PatchCont(Space s, std::vector<std::pair<std::vector<Ball>, ContCode>> pieces)
      : sp_(std::move(s)), pieces_(std::move(pieces)) {
    long shift = -60;
    for (const auto& pr : pieces_) shift = std::max(shift, pr.second.modulus().shift);
    shift_ = shift;
  }

  const Space& space() const override { return sp_; }

  Bracket enclosure(const Ball& ball) const override {
    std::vector<std::size_t> covering, touching;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      for (const auto& rb : pieces_[i].first) {
        Rat d = dist(sp_, ball.center, rb.center);
        if (d + ball.radius <= rb.radius) {
          covering.push_back(i);
          break;
        }
      }
      for (const auto& rb : pieces_[i].first) {
        if (dist(sp_, ball.center, rb.center) < ball.radius + rb.radius) {
          touching.push_back(i);
          break;
        }
      }
    }
    if (!covering.empty()) {
      // The ball lies inside each covering piece's region, where the glued
      // function coincides with that piece; the enclosures intersect.
      std::optional<Bracket> acc;
      try {
        for (std::size_t i : covering) {
          Bracket e = pieces_[i].second.enclosure(ball);
          if (!acc)
            acc = e;
          else
            acc->intersect(e);
        }
        return *acc;
      } catch (const std::exception&) {
        // fall through to the hull when pieces disagree below the checked
        // resolution
      }
    }
    if (touching.empty())
      throw std::logic_error("patch: ball escapes every piece region");
    // Every point of the ball belongs to some touching piece's region, so
    // the hull of the touching enclosures contains the range.
    std::optional<Rat> lo;
    ExtRat hi = ExtRat(Rat(0));
    bool first = true;
    for (std::size_t i : touching) {
      Bracket e = pieces_[i].second.enclosure(ball);
      lo = lo ? rat_min(*lo, e.lo) : e.lo;
      hi = first ? e.hi : ext_max(hi, e.hi);
      first = false;
    }
    return Bracket(*lo, hi);
  }

  Modulus modulus() const override { return Modulus{shift_}; }
  std::optional<Rat> value_exact(const Point& x) const override {
    for (const auto& pr : pieces_)
      for (const auto& rb : pr.first)
        if (in_open_ball(sp_, rb, x)) return pr.second.value_exact(x);
    return std::nullopt;
  }
  std::string name() const override { return "patch"; }

 private:
  Space sp_;
  std::vector<std::pair<std::vector<Ball>, ContCode>> pieces_;
  long shift_;
};

class ScaledCont final : public ContBackend {
 public:
  ScaledCont(ContCode f, Rat k) : f_(std::move(f)), k_(std::move(k)) {}
  const Space& space() const override { return f_.space(); }
  Bracket enclosure(const Ball& ball) const override {
    Bracket e = f_.enclosure(ball);
    return Bracket(Rat(e.lo * k_), ext_scale(e.hi, k_));
  }
  Modulus modulus() const override { return f_.modulus().scaled(k_); }
  std::optional<Rat> value_exact(const Point& x) const override {
    if (auto v = f_.value_exact(x)) return Rat(*v * k_);
    return std::nullopt;
  }
  bool exact_ranges() const override { return f_.exact_ranges(); }
  std::optional<std::pair<Point, Rat>> range_min_point(const Ball& ball) const override {
    if (auto m = f_.backend().range_min_point(ball))
      return std::make_pair(m->first, Rat(m->second * k_));
    return std::nullopt;
  }
  const Region* enum_region() const override { return f_.backend().enum_region(); }
  int enum_levels() const override { return f_.backend().enum_levels(); }
  std::string name() const override { return "scaled(" + f_.backend().name() + ")"; }

 private:
  ContCode f_;
  Rat k_;  // positive
};

class MinConstCont final : public ContBackend {
 public:
  MinConstCont(ContCode f, Rat cap) : f_(std::move(f)), cap_(std::move(cap)) {}
  const Space& space() const override { return f_.space(); }
  Bracket enclosure(const Ball& ball) const override {
    Bracket e = f_.enclosure(ball);
    return Bracket(rat_min(e.lo, cap_), ext_min(e.hi, ExtRat(cap_)));
  }
  Modulus modulus() const override { return f_.modulus(); }
  std::optional<Rat> value_exact(const Point& x) const override {
    if (auto v = f_.value_exact(x)) return rat_min(*v, cap_);
    return std::nullopt;
  }
  bool exact_ranges() const override { return f_.exact_ranges(); }
  std::optional<std::pair<Point, Rat>> range_min_point(const Ball& ball) const override {
    if (auto m = f_.backend().range_min_point(ball))
      return std::make_pair(m->first, rat_min(m->second, cap_));
    return std::nullopt;
  }
  const Region* enum_region() const override { return f_.backend().enum_region(); }
  int enum_levels() const override { return f_.backend().enum_levels(); }
  std::string name() const override { return "min-const(" + f_.backend().name() + ")"; }

 private:
  ContCode f_;
  Rat cap_;
};

// ---------------------------------------------------------------------------
// Lower-semicontinuous backends.

class PiecewiseLsc final : public LscBackend {
 public:
  PiecewiseLsc(Space s, PiecewiseLscSpec spec, Rat lb)
      : sp_(std::move(s)), spec_(std::move(spec)), lb_(std::move(lb)) {}

  struct InfResult {
    ExtRat inf = ExtRat::inf();
    std::optional<Point> witness;  // closure point with value <= inf
  };

  /// Exact infimum over the points t of [l, r] admitted by the inclusion
  /// flags.  The witness lies in the closed interval and its function value
  /// never exceeds the infimum (cut values sit below their one-sided
  /// limits).
  InfResult inf_on(const Rat& l, const Rat& r, bool incl_l, bool incl_r) const {
    InfResult out;
    if (l > r || (l == r && !(incl_l && incl_r))) return out;
    auto better = [&](const ExtRat& v, const Rat& at) {
      if (v < out.inf) {
        out.inf = v;
        out.witness = Point(at);
      }
    };
    const auto& cuts = spec_.cuts;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
      const Rat& t = cuts[i];
      if ((l < t && t < r) || (t == l && incl_l) || (t == r && incl_r))
        better(spec_.values[i], t);
    }
    for (std::size_t i = 0; i < spec_.pieces.size(); ++i) {
      const auto& pc = spec_.pieces[i];
      if (pc.infinite) continue;
      Rat p = rat_max(cuts[i], l);
      Rat q = rat_min(cuts[i + 1], r);
      auto pval = [&](const Rat& t) { return ExtRat(Rat(pc.c0 + pc.c1 * t)); };
      if (p > q) continue;
      if (p == q) {
        bool interior = cuts[i] < p && p < cuts[i + 1];
        bool included = (l < p || incl_l) && (p < r || incl_r);
        if (interior && included) better(pval(p), p);
        continue;
      }
      // Affine on the nonempty overlap (p, q): the infimum is the smaller
      // end limit whether or not the end is included.
      better(pval(p), p);
      better(pval(q), q);
    }
    return out;
  }

  InfResult query(const Ball& ball, bool closed) const {
    const Rat& c = ball.center.rat();
    Rat lo = c - ball.radius;
    Rat hi = c + ball.radius;
    Rat l = rat_max(sp_.lo(), lo);
    Rat r = rat_min(sp_.hi(), hi);
    bool incl_l = closed || lo < sp_.lo();
    bool incl_r = closed || hi > sp_.hi();
    return inf_on(l, r, incl_l, incl_r);
  }

  ExtRat value_at(const Rat& t) const {
    const auto& cuts = spec_.cuts;
    for (std::size_t i = 0; i < cuts.size(); ++i)
      if (t == cuts[i]) return spec_.values[i];
    for (std::size_t i = 0; i < spec_.pieces.size(); ++i)
      if (cuts[i] < t && t < cuts[i + 1]) {
        const auto& pc = spec_.pieces[i];
        if (pc.infinite) return ExtRat::inf();
        return ExtRat(Rat(pc.c0 + pc.c1 * t));
      }
    throw std::invalid_argument("pl_lsc: point outside the interval");
  }

  const Space& space() const override { return sp_; }
  ExtRat ball_bound(const Ball& ball) const override { return query(ball, false).inf; }
  ExtRat upper_evidence(const Point& x) const override { return value_at(x.rat()); }
  std::optional<ExtRat> value_exact(const Point& x) const override {
    return value_at(x.rat());
  }
  Rat lower_bound() const override { return lb_; }

  bool honest() const override { return true; }
  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    ExtRat v = query(ball, closed).inf;
    if (v.infinite) return Bracket(rat_max(lb_, pow2(20)), ExtRat::inf());
    return Bracket::exact(v.value);
  }
  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    return query(ball, closed).witness;
  }
  std::string name() const override { return "pl-lsc"; }

 private:
  Space sp_;
  PiecewiseLscSpec spec_;
  Rat lb_;
};

class ConstLsc final : public LscBackend {
 public:
  ConstLsc(Space s, Rat v) : sp_(std::move(s)), v_(std::move(v)) {}
  const Space& space() const override { return sp_; }
  ExtRat ball_bound(const Ball& ball) const override {
    (void)ball;
    return ExtRat(v_);
  }
  ExtRat upper_evidence(const Point& x) const override {
    (void)x;
    return ExtRat(v_);
  }
  std::optional<ExtRat> value_exact(const Point& x) const override {
    (void)x;
    return ExtRat(v_);
  }
  Rat lower_bound() const override { return v_; }
  bool honest() const override { return true; }
  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    (void)ball;
    (void)closed;
    return Bracket::exact(v_);
  }
  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    (void)closed;
    return ball.center;
  }
  std::string name() const override { return "const-lsc"; }

 private:
  Space sp_;
  Rat v_;
};

class ContAsLsc final : public LscBackend {
 public:
  ContAsLsc(ContCode f, Rat lb) : f_(std::move(f)), lb_(std::move(lb)) {
    Kind k = f_.space().kind();
    honest_ = f_.exact_ranges() &&
              (k == Kind::UnitInterval || k == Kind::ClosedInterval);
  }

  const Space& space() const override { return f_.space(); }
  ExtRat ball_bound(const Ball& ball) const override {
    try {
      return ExtRat(rat_max(f_.enclosure(ball).lo, lb_));
    } catch (const std::exception&) {
      return ExtRat(lb_);
    }
  }
  ExtRat upper_evidence(const Point& x) const override {
    if (auto v = f_.value_exact(x)) return ExtRat(*v);
    try {
      return f_.eval(x, 12, 48).bracket.hi;
    } catch (const std::exception&) {
      return ExtRat::inf();
    }
  }
  std::optional<ExtRat> value_exact(const Point& x) const override {
    if (auto v = f_.value_exact(x)) return ExtRat(*v);
    return std::nullopt;
  }
  Rat lower_bound() const override { return lb_; }

  // On interval kinds the infimum of a continuous function over an open
  // ball equals the infimum over its closure (end values are limits of
  // interior values), so exact ranges answer both query flavours.
  bool honest() const override { return honest_; }
  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    (void)closed;
    if (!honest_) return std::nullopt;
    return Bracket::exact(f_.enclosure(ball).lo);
  }
  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    (void)closed;
    if (!honest_) return std::nullopt;
    if (auto m = f_.backend().range_min_point(ball)) return m->first;
    return std::nullopt;
  }
  const Region* enum_region() const override { return f_.backend().enum_region(); }
  int enum_levels() const override { return f_.backend().enum_levels(); }
  std::string name() const override { return "cont-as-lsc(" + f_.backend().name() + ")"; }

 private:
  ContCode f_;
  Rat lb_;
  bool honest_;
};

class ZeroOnClosedLsc final : public LscBackend {
 public:
  ZeroOnClosedLsc(LscCode h, ClosedSet set, long budget)
      : h_(std::move(h)), set_(std::move(set)), off_(set_.complement_balls(budget)) {}

  const Space& space() const override { return h_.space(); }
  ExtRat ball_bound(const Ball& ball) const override {
    for (const auto& cb : off_)
      if (strictly_inside(space(), ball, cb))
        return ext_max(ExtRat(Rat(0)), h_.ball_bound(ball));
    return ExtRat(Rat(0));
  }
  ExtRat upper_evidence(const Point& x) const override {
    return set_.member(x) ? ExtRat(Rat(0)) : h_.upper_evidence(x);
  }
  std::optional<ExtRat> value_exact(const Point& x) const override {
    if (set_.member(x)) return ExtRat(Rat(0));
    return h_.value_exact(x);
  }
  Rat lower_bound() const override { return Rat(0); }
  std::string name() const override { return "zero-on-closed"; }

 private:
  LscCode h_;
  ClosedSet set_;
  std::vector<Ball> off_;
};

class CombineLsc final : public LscBackend {
 public:
  CombineLsc(CombineOp op, LscCode f, LscCode g)
      : op_(op), f_(std::move(f)), g_(std::move(g)) {}

  const Space& space() const override { return f_.space(); }

  ExtRat ball_bound(const Ball& ball) const override {
    ExtRat a = f_.ball_bound(ball);
    ExtRat b = g_.ball_bound(ball);
    switch (op_) {
      case CombineOp::Sum: return a + b;
      case CombineOp::Max: return ext_max(a, b);
      case CombineOp::Min: return ext_min(a, b);
    }
    throw std::logic_error("combine: unhandled op");
  }

  ExtRat upper_evidence(const Point& x) const override {
    return combine(f_.upper_evidence(x), g_.upper_evidence(x));
  }

  std::optional<ExtRat> value_exact(const Point& x) const override {
    auto a = f_.value_exact(x);
    auto b = g_.value_exact(x);
    if (a && b) return combine(*a, *b);
    return std::nullopt;
  }

  Rat lower_bound() const override {
    switch (op_) {
      case CombineOp::Sum: return f_.lower_bound() + g_.lower_bound();
      case CombineOp::Max: return rat_max(f_.lower_bound(), g_.lower_bound());
      case CombineOp::Min: return rat_min(f_.lower_bound(), g_.lower_bound());
    }
    throw std::logic_error("combine: unhandled op");
  }

  bool honest() const override { return f_.honest() && g_.honest(); }
  Rat honest_slack() const override {
    if (op_ == CombineOp::Sum) return f_.honest_slack() + g_.honest_slack();
    return rat_max(f_.honest_slack(), g_.honest_slack());
  }

  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    auto bf = f_.backend().ball_inf(ball, closed);
    auto bg = g_.backend().ball_inf(ball, closed);
    if (!bf || !bg) return std::nullopt;
    if (op_ == CombineOp::Min)
      return Bracket(rat_min(bf->lo, bg->lo), ext_min(bf->hi, bg->hi));
    Rat lo = op_ == CombineOp::Sum ? Rat(bf->lo + bg->lo) : rat_max(bf->lo, bg->lo);
    if (!closed) return Bracket(lo, ExtRat::inf());  // open upper end not certified
    ExtRat hi = best_witness(ball, closed).second;
    return Bracket(lo, hi);
  }

  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    if (op_ == CombineOp::Min) {
      auto bf = f_.backend().ball_inf(ball, closed);
      auto bg = g_.backend().ball_inf(ball, closed);
      if (!bf || !bg) return std::nullopt;
      if (bf->hi <= bg->hi) return f_.backend().ball_inf_witness(ball, closed);
      return g_.backend().ball_inf_witness(ball, closed);
    }
    if (!closed) return std::nullopt;
    return best_witness(ball, closed).first;
  }

  std::string name() const override { return "combine"; }

 private:
  ExtRat combine(const ExtRat& a, const ExtRat& b) const {
    switch (op_) {
      case CombineOp::Sum: return a + b;
      case CombineOp::Max: return ext_max(a, b);
      case CombineOp::Min: return ext_min(a, b);
    }
    throw std::logic_error("combine: unhandled op");
  }

  /// Sum/Max honest upper end: re-evaluate each component's infimum
  /// witness through both codes; the combined value at an actual ball
  /// point bounds the combined infimum from above.
  std::pair<std::optional<Point>, ExtRat> best_witness(const Ball& ball,
                                                       bool closed) const {
    std::vector<Point> cands;
    if (auto w = f_.backend().ball_inf_witness(ball, closed)) cands.push_back(*w);
    if (auto w = g_.backend().ball_inf_witness(ball, closed)) cands.push_back(*w);
    cands.push_back(ball.center);
    std::optional<Point> best;
    ExtRat hi = ExtRat::inf();
    for (const auto& w : cands) {
      ExtRat v = combine(f_.upper_evidence(w), g_.upper_evidence(w));
      if (v < hi) {
        hi = v;
        best = w;
      }
    }
    return {best, hi};
  }

  CombineOp op_;
  LscCode f_, g_;
};

class AddScaledDistLsc final : public LscBackend {
 public:
  AddScaledDistLsc(LscCode f, Point x0, Rat eps)
      : f_(std::move(f)), x0_(std::move(x0)), eps_(std::move(eps)) {}

  const Space& space() const override { return f_.space(); }

  ExtRat ball_bound(const Ball& ball) const override {
    Rat df = dist(space(), ball.center, x0_);
    Rat extra = df > ball.radius ? Rat(df - ball.radius) : Rat(0);
    return f_.ball_bound(ball) + Rat(eps_ * extra);
  }
  ExtRat upper_evidence(const Point& x) const override {
    return f_.upper_evidence(x) + Rat(eps_ * dist(space(), x, x0_));
  }
  std::optional<ExtRat> value_exact(const Point& x) const override {
    if (auto v = f_.value_exact(x)) return *v + Rat(eps_ * dist(space(), x, x0_));
    return std::nullopt;
  }
  Rat lower_bound() const override { return f_.lower_bound(); }

  bool honest() const override { return f_.honest(); }
  Rat honest_slack() const override { return f_.honest_slack(); }
  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    auto bi = f_.backend().ball_inf(ball, closed);
    if (!bi) return std::nullopt;
    Rat df = dist(space(), ball.center, x0_);
    Rat extra = df > ball.radius ? Rat(df - ball.radius) : Rat(0);
    Rat lo = bi->lo + eps_ * extra;
    ExtRat hi = witness_value(ball, closed).second;
    return Bracket(lo, hi);
  }
  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    return witness_value(ball, closed).first;
  }
  std::string name() const override { return "add-dist"; }

 private:
  std::pair<std::optional<Point>, ExtRat> witness_value(const Ball& ball,
                                                        bool closed) const {
    std::vector<Point> cands;
    if (auto w = f_.backend().ball_inf_witness(ball, closed)) {
      if (closed || in_open_ball(space(), ball, *w)) cands.push_back(*w);
    }
    cands.push_back(ball.center);
    std::optional<Point> best;
    ExtRat hi = ExtRat::inf();
    for (const auto& w : cands) {
      ExtRat v = upper_evidence(w);
      if (v < hi) {
        hi = v;
        best = w;
      }
    }
    return {best, hi};
  }

  LscCode f_;
  Point x0_;
  Rat eps_;
};

class EpigraphLsc final : public LscBackend {
 public:
  EpigraphLsc(ClosedSet epi, Space dom, Rat vlo, Rat vhi, int res, long budget)
      : epi_(std::move(epi)),
        dom_(std::move(dom)),
        vlo_(std::move(vlo)),
        vhi_(std::move(vhi)),
        res_(res),
        boxes_(epi_.complement_balls(budget)) {}

  const Space& space() const override { return dom_; }

  /// An excluded product-metric ball (a, t) +- s says no epigraph point
  /// sits over Ball(a, s) with second coordinate in (t - s, t + s), i.e.
  /// f >= min(t + s, vhi) there.
  ExtRat ball_bound(const Ball& ball) const override {
    Rat best = vlo_;
    for (const auto& box : boxes_) {
      const auto& tup = box.center.tuple();
      Ball xpart{tup[0], box.radius};
      if (!strictly_inside(dom_, ball, xpart)) continue;
      best = rat_max(best, rat_min(Rat(tup[1].rat() + box.radius), vhi_));
    }
    return ExtRat(best);
  }

  ExtRat upper_evidence(const Point& x) const override {
    Rat step = pow2(-res_);
    for (Rat t = vlo_; t <= vhi_; t += step) {
      if (epi_.member(Point(std::vector<Point>{x, Point(t)}))) return ExtRat(t);
    }
    return ExtRat::inf();
  }

  Rat lower_bound() const override { return vlo_; }
  std::string name() const override { return "epigraph"; }

 private:
  ClosedSet epi_;
  Space dom_;
  Rat vlo_, vhi_;
  int res_;
  std::vector<Ball> boxes_;
};

class PromotedHonestLsc final : public LscBackend {
 public:
  PromotedHonestLsc(LscCode base, int res) : base_(std::move(base)), res_(res) {
    pts_ = net(base_.space(), res_);
    cov_ = net_covering_radius(base_.space(), res_);
    cell_ = cov_ > 0 ? Rat(cov_ * 2) : pow2(-res_);
  }

  const Space& space() const override { return base_.space(); }

  ExtRat ball_bound(const Ball& ball) const override {
    return ext_max(base_.ball_bound(ball), cover_floor(ball));
  }
  ExtRat upper_evidence(const Point& x) const override {
    return base_.upper_evidence(x);
  }
  std::optional<ExtRat> value_exact(const Point& x) const override {
    return base_.value_exact(x);
  }
  Rat lower_bound() const override { return base_.lower_bound(); }

  bool honest() const override { return true; }
  Rat honest_slack() const override { return pow2(-res_); }

  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    ExtRat lo_e = cover_floor(ball);
    lo_e = ext_max(lo_e,
                   base_.ball_bound(Ball{ball.center, ball.radius + pow2(-res_ - 4)}));
    ExtRat hi = in_ball_evidence(ball, closed).second;
    Rat lo = lo_e.finite() ? lo_e.value : rat_max(base_.lower_bound(), pow2(20));
    return Bracket(lo, hi);
  }
  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    return in_ball_evidence(ball, closed).first;
  }
  std::string name() const override { return "promoted(" + base_.backend().name() + ")"; }

 private:
  /// Covers the closed ball with net cells and takes the least cell bound;
  /// every ball point lies in one of the cells, so this is a certified
  /// lower bound on the closed-ball infimum.
  ExtRat cover_floor(const Ball& ball) const {
    ExtRat m = ExtRat::inf();
    for (const auto& z : pts_)
      if (dist(space(), z, ball.center) <= ball.radius + cov_)
        m = ext_min(m, base_.ball_bound(Ball{z, cell_}));
    return m;
  }

  std::pair<std::optional<Point>, ExtRat> in_ball_evidence(const Ball& ball,
                                                           bool closed) const {
    std::optional<Point> best;
    ExtRat hi = ExtRat::inf();
    auto consider = [&](const Point& w) {
      ExtRat v = base_.upper_evidence(w);
      if (v < hi) {
        hi = v;
        best = w;
      }
    };
    for (const auto& z : pts_) {
      Rat d = dist(space(), z, ball.center);
      if (closed ? d <= ball.radius : d < ball.radius) consider(z);
    }
    consider(ball.center);
    return {best, hi};
  }

  LscCode base_;
  int res_;
  std::vector<Point> pts_;
  Rat cov_;
  Rat cell_;
};

class ScaledLsc final : public LscBackend {
 public:
  ScaledLsc(LscCode f, Rat k) : f_(std::move(f)), k_(std::move(k)) {}
  const Space& space() const override { return f_.space(); }
  ExtRat ball_bound(const Ball& ball) const override {
    return ext_scale(f_.ball_bound(ball), k_);
  }
  ExtRat upper_evidence(const Point& x) const override {
    return ext_scale(f_.upper_evidence(x), k_);
  }
  std::optional<ExtRat> value_exact(const Point& x) const override {
    if (auto v = f_.value_exact(x)) return ext_scale(*v, k_);
    return std::nullopt;
  }
  Rat lower_bound() const override { return Rat(f_.lower_bound() * k_); }
  bool honest() const override { return f_.honest(); }
  Rat honest_slack() const override { return Rat(f_.honest_slack() * k_); }
  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    auto bi = f_.backend().ball_inf(ball, closed);
    if (!bi) return std::nullopt;
    return Bracket(Rat(bi->lo * k_), ext_scale(bi->hi, k_));
  }
  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    return f_.backend().ball_inf_witness(ball, closed);
  }
  const Region* enum_region() const override { return f_.backend().enum_region(); }
  int enum_levels() const override { return f_.backend().enum_levels(); }
  std::string name() const override { return "scaled(" + f_.backend().name() + ")"; }

 private:
  LscCode f_;
  Rat k_;  // positive
};

class MinConstLsc final : public LscBackend {
 public:
  MinConstLsc(LscCode f, Rat cap) : f_(std::move(f)), cap_(std::move(cap)) {}
  const Space& space() const override { return f_.space(); }
  ExtRat ball_bound(const Ball& ball) const override {
    return ext_min(f_.ball_bound(ball), ExtRat(cap_));
  }
  ExtRat upper_evidence(const Point& x) const override {
    return ext_min(f_.upper_evidence(x), ExtRat(cap_));
  }
  std::optional<ExtRat> value_exact(const Point& x) const override {
    if (auto v = f_.value_exact(x)) return ext_min(*v, ExtRat(cap_));
    return std::nullopt;
  }
  Rat lower_bound() const override { return rat_min(f_.lower_bound(), cap_); }
  bool honest() const override { return f_.honest(); }
  Rat honest_slack() const override { return f_.honest_slack(); }
  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    auto bi = f_.backend().ball_inf(ball, closed);
    if (!bi) return std::nullopt;
    return Bracket(rat_min(bi->lo, cap_), ext_min(bi->hi, ExtRat(cap_)));
  }
  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    auto bi = f_.backend().ball_inf(ball, closed);
    if (bi && ExtRat(cap_) < bi->hi) return ball.center;  // the cap is the evidence
    return f_.backend().ball_inf_witness(ball, closed);
  }
  const Region* enum_region() const override { return f_.backend().enum_region(); }
  int enum_levels() const override { return f_.backend().enum_levels(); }
  std::string name() const override { return "min-const(" + f_.backend().name() + ")"; }

 private:
  LscCode f_;
  Rat cap_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Modulus.

Modulus Modulus::scaled(const Rat& factor) const {
  if (factor <= 0)
    throw std::invalid_argument("Modulus::scaled: factor must be positive");
  return Modulus{shift + ceil_log2(factor)};
}

// ---------------------------------------------------------------------------
// ContCode.

EvalResult ContCode::eval(const Point& x, int precision, long budget) const {
  if (!space().contains(x))
    throw std::invalid_argument("eval: point not in " + space().describe());
  if (auto v = b_->value_exact(x)) return {Bracket::exact(*v), true};
  ExtRat target(pow2(-precision));
  std::optional<Bracket> acc;
  std::string last_err = "no enclosure attempted";
  for (long j = 0; j <= budget; ++j) {
    Bracket e;
    try {
      e = b_->enclosure(Ball{x, pow2(-j)});
    } catch (const std::exception& ex) {
      last_err = ex.what();
      continue;
    }
    if (!acc)
      acc = e;
    else
      acc->intersect(e);
    if (acc->width() <= target) return {*acc, true};
  }
  if (!acc)
    throw std::logic_error("eval: no ball level produced an enclosure (" + last_err +
                           ")");
  return {*acc, false};
}

bool ContCode::maps(const Ball& ball, const Rat& u, const Rat& v) const {
  if (v < u) return false;
  try {
    Bracket e = b_->enclosure(ball);
    return u <= e.lo && e.hi <= ExtRat(v);
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<ContItem> ContCode::items(long budget) const {
  std::vector<ContItem> out;
  for (const auto& ball : enum_balls(space(), b_->enum_region(), b_->enum_levels(),
                                     budget)) {
    try {
      Bracket e = b_->enclosure(ball);
      if (e.hi.finite()) out.push_back(ContItem{ball, e.lo, e.hi.value});
    } catch (const std::exception&) {
      // sparse backends cannot bound every ball; the enumeration skips those
    }
    if (static_cast<long>(out.size()) >= budget) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// LscCode.

ExtRat LscCode::value_lower(const Point& x, long budget) const {
  if (!space().contains(x))
    throw std::invalid_argument("value_lower: point not in " + space().describe());
  if (auto v = b_->value_exact(x)) return *v;
  ExtRat best(b_->lower_bound());
  long levels = std::min<long>(budget, 60);
  for (long j = 0; j <= levels; ++j) {
    best = ext_max(best, b_->ball_bound(Ball{x, pow2(-j)}));
    if (best.infinite) break;
  }
  return best;
}

bool LscCode::holds(const Ball& ball, const Rat& q) const {
  return ExtRat(q) <= b_->ball_bound(ball);
}

Bracket LscCode::honest_ball_inf(const Ball& ball, bool closed) const {
  if (!b_->honest())
    throw std::logic_error("honest_ball_inf: code '" + b_->name() +
                           "' does not answer infimum queries");
  auto r = b_->ball_inf(ball, closed);
  if (!r) throw std::logic_error("honest_ball_inf: backend declined the query");
  return *r;
}

std::vector<LscItem> LscCode::items(long budget) const {
  std::vector<LscItem> out;
  for (const auto& ball : enum_balls(space(), b_->enum_region(), b_->enum_levels(),
                                     budget)) {
    ExtRat q = b_->ball_bound(ball);
    if (q.finite()) out.push_back(LscItem{ball, q.value});
    if (static_cast<long>(out.size()) >= budget) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed sets.

ClosedSet closed_point_set(const Space& s, const Point& x) {
  if (!s.contains(x))
    throw std::invalid_argument("closed_point_set: point not in the space");
  auto member = [s, x](const Point& p) { return point_eq(s, p, x); };
  auto complement = [s, x](long budget) {
    std::vector<Ball> out;
    for (int L = 0; L <= 24 && static_cast<long>(out.size()) < budget; ++L) {
      std::vector<Point> pts;
      Rat cov;
      try {
        pts = net(s, L);
        cov = net_covering_radius(s, L);
      } catch (const std::exception&) {
        break;
      }
      for (const auto& z : pts) {
        Rat d = dist(s, z, x);
        if (d == 0) continue;
        Rat r = cov > 0 ? rat_min(Rat(cov * 2), d) : d;
        out.push_back(Ball{z, r});
        if (static_cast<long>(out.size()) >= budget) break;
      }
    }
    return out;
  };
  json j;
  j["set"] = "point";
  j["space"] = jsonu::space_to_json(s);
  j["x"] = jsonu::point_to_json(x);
  return ClosedSet{s, std::move(member), std::move(complement), j.dump()};
}

ClosedSet sublevel_closed_set(const LscCode& f, const Point& x0, const Rat& eps,
                              const Rat& threshold) {
  if (!f.space().contains(x0))
    throw std::invalid_argument("sublevel_closed_set: base point not in the space");
  Space s = f.space();
  auto member = [f, s, x0, eps, threshold](const Point& p) {
    auto v = f.value_exact(p);
    if (!v)
      throw std::logic_error(
          "sublevel membership needs an exact-valued potential at the queried point");
    ExtRat total = *v + Rat(eps * dist(s, p, x0));
    return total <= ExtRat(threshold);
  };
  auto complement = [f, s, x0, eps, threshold](long budget) {
    std::vector<Ball> out;
    for (int L = 0; L <= 24 && static_cast<long>(out.size()) < budget; ++L) {
      std::vector<Point> pts;
      Rat cov;
      try {
        pts = net(s, L);
        cov = net_covering_radius(s, L);
      } catch (const std::exception&) {
        break;
      }
      Rat r = cov > 0 ? Rat(cov * 2) : pow2(-L);
      for (const auto& z : pts) {
        Ball b{z, r};
        Rat dz = dist(s, z, x0);
        Rat extra = dz > r ? Rat(dz - r) : Rat(0);
        ExtRat floor = f.ball_bound(b) + Rat(eps * extra);
        if (ExtRat(threshold) < floor) {
          out.push_back(b);
          if (static_cast<long>(out.size()) >= budget) break;
        }
      }
    }
    return out;
  };
  std::string serial;
  if (!f.serial().empty()) {
    json j;
    j["set"] = "sublevel";
    j["f"] = json::parse(f.serial());
    j["x0"] = jsonu::point_to_json(x0);
    j["eps"] = jsonu::rat_to_json(eps);
    j["threshold"] = jsonu::rat_to_json(threshold);
    serial = j.dump();
  }
  return ClosedSet{s, std::move(member), std::move(complement), std::move(serial)};
}

// ---------------------------------------------------------------------------
// Continuous factories.

ContCode const_cont(const Space& s, const Rat& value) {
  json j;
  j["op"] = "const-cont";
  j["space"] = jsonu::space_to_json(s);
  j["value"] = jsonu::rat_to_json(value);
  return ContCode(std::make_shared<ConstCont>(s, value), j.dump());
}

ContCode pl_cont(const Space& s, std::vector<std::pair<Rat, Rat>> knots) {
  if (s.kind() != Kind::UnitInterval && s.kind() != Kind::ClosedInterval)
    throw std::invalid_argument("pl_cont: interval kinds only");
  if (knots.size() < 2) throw std::invalid_argument("pl_cont: need at least two knots");
  if (knots.front().first != s.lo() || knots.back().first != s.hi())
    throw std::invalid_argument("pl_cont: knots must span the interval");
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    if (!(knots[i].first < knots[i + 1].first))
      throw std::invalid_argument("pl_cont: knot abscissae must increase");
  json j;
  j["op"] = "pl-cont";
  j["space"] = jsonu::space_to_json(s);
  json ks = json::array();
  for (const auto& kn : knots)
    ks.push_back(json{{"x", jsonu::rat_to_json(kn.first)},
                      {"y", jsonu::rat_to_json(kn.second)}});
  j["knots"] = ks;
  return ContCode(std::make_shared<PLCont>(s, std::move(knots)), j.dump());
}

ContCode cont_from_samples(const Space& s, std::vector<std::pair<Point, Rat>> samples,
                           Modulus modulus) {
  if (samples.empty()) throw std::invalid_argument("cont_from_samples: no samples");
  for (const auto& sm : samples)
    if (!s.contains(sm.first))
      throw std::invalid_argument("cont_from_samples: sample point not in the space");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      Rat d = dist(s, samples[i].first, samples[j].first);
      Rat dy = rat_abs(Rat(samples[i].second - samples[j].second));
      if (dy == 0) continue;
      long n = 0;
      while (pow2(-n) > dy && n < 512) ++n;  // smallest n with 2^-n <= dy
      if (d < modulus.input_radius(n)) {
        std::ostringstream msg;
        msg << "cont_from_samples: samples " << i << " and " << j
            << " violate the declared modulus (distance " << rat_str(d)
            << ", value gap " << rat_str(dy) << ")";
        throw std::invalid_argument(msg.str());
      }
    }
  }
  json j;
  j["op"] = "sampled-cont";
  j["space"] = jsonu::space_to_json(s);
  json arr = json::array();
  for (const auto& sm : samples)
    arr.push_back(json{{"x", jsonu::point_to_json(sm.first)},
                       {"y", jsonu::rat_to_json(sm.second)}});
  j["samples"] = arr;
  j["shift"] = modulus.shift;
  return ContCode(std::make_shared<SampledCont>(s, std::move(samples), modulus),
                  j.dump());
}

ContCode patch(const Space& s,
               std::vector<std::pair<std::vector<Ball>, ContCode>> pieces,
               int working_resolution) {
  if (pieces.empty()) throw std::invalid_argument("patch: no pieces");
  for (const auto& pr : pieces) {
    if (!pr.second.space().same_as(s))
      throw std::invalid_argument("patch: piece given on a different space");
    if (pr.first.empty()) throw std::invalid_argument("patch: empty piece region");
  }
  std::vector<Point> pts = net(s, working_resolution);
  auto in_region = [&](const std::vector<Ball>& region, const Point& x) {
    for (const auto& b : region)
      if (in_open_ball(s, b, x)) return true;
    return false;
  };
  for (const auto& x : pts) {
    std::vector<std::pair<std::size_t, Bracket>> here;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (!in_region(pieces[i].first, x)) continue;
      here.emplace_back(i, pieces[i].second.eval(x, working_resolution, 48).bracket);
    }
    if (here.empty())
      throw std::invalid_argument("patch: piece regions leave a net point uncovered");
    for (std::size_t a = 0; a < here.size(); ++a) {
      for (std::size_t b = a + 1; b < here.size(); ++b) {
        const Bracket& ba = here[a].second;
        const Bracket& bb = here[b].second;
        if (bb.hi < ExtRat(ba.lo) || ba.hi < ExtRat(bb.lo)) {
          std::ostringstream msg;
          msg << "patch: pieces " << here[a].first << " and " << here[b].first
              << " disagree at a shared net point";
          throw std::invalid_argument(msg.str());
        }
      }
    }
  }
  std::string serial;
  {
    json j;
    j["op"] = "patch";
    j["space"] = jsonu::space_to_json(s);
    j["resolution"] = working_resolution;
    json arr = json::array();
    bool ok = true;
    for (const auto& pr : pieces) {
      auto sub = sub_serial(pr.second.serial());
      if (!sub) {
        ok = false;
        break;
      }
      json region = json::array();
      for (const auto& b : pr.first) region.push_back(jsonu::ball_to_json(b));
      arr.push_back(json{{"region", region}, {"code", *sub}});
    }
    if (ok) {
      j["pieces"] = arr;
      serial = j.dump();
    }
  }
  return ContCode(std::make_shared<PatchCont>(s, std::move(pieces)), serial);
}

ContCode scale_cont(const ContCode& f, const Rat& factor) {
  if (factor <= 0) throw std::invalid_argument("scale_cont: factor must be positive");
  std::string serial;
  if (auto sub = sub_serial(f.serial())) {
    json j;
    j["op"] = "scale-cont";
    j["f"] = *sub;
    j["factor"] = jsonu::rat_to_json(factor);
    serial = j.dump();
  }
  return ContCode(std::make_shared<ScaledCont>(f, factor), serial);
}

ContCode min_const_cont(const ContCode& f, const Rat& cap) {
  std::string serial;
  if (auto sub = sub_serial(f.serial())) {
    json j;
    j["op"] = "min-const-cont";
    j["f"] = *sub;
    j["cap"] = jsonu::rat_to_json(cap);
    serial = j.dump();
  }
  return ContCode(std::make_shared<MinConstCont>(f, cap), serial);
}

// ---------------------------------------------------------------------------
// Lower-semicontinuous factories.

LscCode pl_lsc(const Space& s, PiecewiseLscSpec spec) {
  if (s.kind() != Kind::UnitInterval && s.kind() != Kind::ClosedInterval)
    throw std::invalid_argument("pl_lsc: interval kinds only");
  const auto& cuts = spec.cuts;
  if (cuts.empty()) throw std::invalid_argument("pl_lsc: no cuts");
  if (cuts.front() != s.lo() || cuts.back() != s.hi())
    throw std::invalid_argument("pl_lsc: cuts must span the interval");
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (!(cuts[i] < cuts[i + 1]))
      throw std::invalid_argument("pl_lsc: cuts must strictly increase");
  if (spec.pieces.size() + 1 != cuts.size() || spec.values.size() != cuts.size())
    throw std::invalid_argument("pl_lsc: piece/value counts do not match the cuts");
  auto side_limit = [&](std::size_t piece, const Rat& t) -> ExtRat {
    const auto& pc = spec.pieces[piece];
    if (pc.infinite) return ExtRat::inf();
    return ExtRat(Rat(pc.c0 + pc.c1 * t));
  };
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    ExtRat lim = ExtRat::inf();
    if (i > 0) lim = ext_min(lim, side_limit(i - 1, cuts[i]));
    if (i < spec.pieces.size()) lim = ext_min(lim, side_limit(i, cuts[i]));
    if (lim < spec.values[i])
      throw std::invalid_argument("pl_lsc: description is not lower semicontinuous at " +
                                  rat_str(cuts[i]));
  }
  PiecewiseLsc probe(s, spec, Rat(0));
  ExtRat global = probe.inf_on(s.lo(), s.hi(), true, true).inf;
  if (global.infinite)
    throw std::invalid_argument("pl_lsc: the description is nowhere finite");
  json j;
  j["op"] = "pl-lsc";
  j["space"] = jsonu::space_to_json(s);
  json jc = json::array();
  for (const auto& t : cuts) jc.push_back(jsonu::rat_to_json(t));
  j["cuts"] = jc;
  json jp = json::array();
  for (const auto& pc : spec.pieces)
    jp.push_back(json{{"inf", pc.infinite},
                      {"c0", jsonu::rat_to_json(pc.c0)},
                      {"c1", jsonu::rat_to_json(pc.c1)}});
  j["pieces"] = jp;
  json jv = json::array();
  for (const auto& v : spec.values) jv.push_back(jsonu::ext_to_json(v));
  j["values"] = jv;
  return LscCode(std::make_shared<PiecewiseLsc>(s, std::move(spec), global.value),
                 j.dump());
}

LscCode lsc_const(const Space& s, const Rat& value) {
  json j;
  j["op"] = "const-lsc";
  j["space"] = jsonu::space_to_json(s);
  j["value"] = jsonu::rat_to_json(value);
  return LscCode(std::make_shared<ConstLsc>(s, value), j.dump());
}

LscCode cont_to_lsc(const ContCode& f) {
  std::optional<Rat> lb;
  if (auto diam = diameter_bound(f.space())) {
    try {
      lb = f.enclosure(Ball{canonical_point(f.space()), Rat(*diam + 1)}).lo;
    } catch (const std::exception&) {
    }
  }
  if (!lb) {
    // cover the space with one net level and take the least enclosure floor
    for (int k = 2; k <= 6 && !lb; k += 2) {
      std::vector<Point> pts;
      Rat cov;
      try {
        pts = net(f.space(), k, f.backend().enum_region());
        cov = net_covering_radius(f.space(), k, f.backend().enum_region());
      } catch (const std::exception&) {
        break;
      }
      Rat r = cov > 0 ? Rat(cov * 2) : pow2(-k);
      std::optional<Rat> m;
      bool complete = true;
      for (const auto& p : pts) {
        try {
          Rat lo = f.enclosure(Ball{p, r}).lo;
          m = m ? rat_min(*m, lo) : lo;
        } catch (const std::exception&) {
          complete = false;
          break;
        }
      }
      if (complete) lb = m;
    }
  }
  if (!lb)
    throw std::invalid_argument(
        "cont_to_lsc: could not establish a global lower bound for the code");
  std::string serial;
  if (auto sub = sub_serial(f.serial())) {
    json j;
    j["op"] = "cont-to-lsc";
    j["f"] = *sub;
    serial = j.dump();
  }
  return LscCode(std::make_shared<ContAsLsc>(f, *lb), serial);
}

LscCode lsc_zero_on_closed(const LscCode& h, const ClosedSet& C, long enum_budget) {
  if (!h.space().same_as(C.space))
    throw std::invalid_argument("lsc_zero_on_closed: potential and set spaces differ");
  if (h.lower_bound() < 0)
    throw std::invalid_argument("lsc_zero_on_closed: potential must be nonnegative");
  std::string serial;
  if (!h.serial().empty() && !C.serial.empty()) {
    json j;
    j["op"] = "zero-on-closed";
    j["h"] = json::parse(h.serial());
    j["set"] = json::parse(C.serial);
    j["budget"] = enum_budget;
    serial = j.dump();
  }
  return LscCode(std::make_shared<ZeroOnClosedLsc>(h, C, enum_budget), serial);
}

LscCode lsc_combine(CombineOp op, const LscCode& f, const LscCode& g) {
  if (!f.space().same_as(g.space()))
    throw std::invalid_argument("lsc_combine: operand spaces differ");
  std::string serial;
  if (!f.serial().empty() && !g.serial().empty()) {
    json j;
    j["op"] = "combine";
    j["combine"] = op == CombineOp::Sum ? "sum" : op == CombineOp::Max ? "max" : "min";
    j["f"] = json::parse(f.serial());
    j["g"] = json::parse(g.serial());
    serial = j.dump();
  }
  return LscCode(std::make_shared<CombineLsc>(op, f, g), serial);
}

LscCode lsc_add_scaled_distance(const LscCode& f, const Point& x0, const Rat& eps) {
  if (!f.space().contains(x0))
    throw std::invalid_argument("lsc_add_scaled_distance: base point not in the space");
  if (eps < 0)
    throw std::invalid_argument("lsc_add_scaled_distance: negative scale");
  std::string serial;
  if (auto sub = sub_serial(f.serial())) {
    json j;
    j["op"] = "add-dist";
    j["f"] = *sub;
    j["x0"] = jsonu::point_to_json(x0);
    j["eps"] = jsonu::rat_to_json(eps);
    serial = j.dump();
  }
  return LscCode(std::make_shared<AddScaledDistLsc>(f, x0, eps), serial);
}

LscCode epigraph_to_lsc(const ClosedSet& epi, const Space& domain, const Rat& value_lo,
                        const Rat& value_hi, int upper_scan_resolution) {
  if (value_hi < value_lo)
    throw std::invalid_argument("epigraph_to_lsc: empty value range");
  Space expected =
      Space::product({domain, Space::closed_interval(value_lo, value_hi)});
  if (!epi.space.same_as(expected))
    throw std::invalid_argument(
        "epigraph_to_lsc: epigraph must live on domain x value-interval");
  Rat steps = Rat(value_hi - value_lo) / pow2(-upper_scan_resolution);
  if (steps > 65536)
    throw std::invalid_argument("epigraph_to_lsc: value scan too fine for the range");
  std::string serial;
  if (!epi.serial.empty()) {
    json j;
    j["op"] = "epigraph";
    j["epi"] = json::parse(epi.serial);
    j["domain"] = jsonu::space_to_json(domain);
    j["lo"] = jsonu::rat_to_json(value_lo);
    j["hi"] = jsonu::rat_to_json(value_hi);
    j["resolution"] = upper_scan_resolution;
    serial = j.dump();
  }
  return LscCode(std::make_shared<EpigraphLsc>(epi, domain, value_lo, value_hi,
                                               upper_scan_resolution, 4096),
                 serial);
}

LscCode honest_promote_compact(const LscCode& f, int resolution) {
  if (!f.space().compact())
    throw std::invalid_argument("honest_promote_compact: space is not compact");
  std::string serial;
  if (auto sub = sub_serial(f.serial())) {
    json j;
    j["op"] = "promote";
    j["f"] = *sub;
    j["resolution"] = resolution;
    serial = j.dump();
  }
  return LscCode(std::make_shared<PromotedHonestLsc>(f, resolution), serial);
}

LscCode scale_lsc(const LscCode& f, const Rat& factor) {
  if (factor <= 0) throw std::invalid_argument("scale_lsc: factor must be positive");
  std::string serial;
  if (auto sub = sub_serial(f.serial())) {
    json j;
    j["op"] = "scale-lsc";
    j["f"] = *sub;
    j["factor"] = jsonu::rat_to_json(factor);
    serial = j.dump();
  }
  return LscCode(std::make_shared<ScaledLsc>(f, factor), serial);
}

LscCode min_const_lsc(const LscCode& f, const Rat& cap) {
  std::string serial;
  if (auto sub = sub_serial(f.serial())) {
    json j;
    j["op"] = "min-const-lsc";
    j["f"] = *sub;
    j["cap"] = jsonu::rat_to_json(cap);
    serial = j.dump();
  }
  return LscCode(std::make_shared<MinConstLsc>(f, cap), serial);
}

}  // namespace evp
