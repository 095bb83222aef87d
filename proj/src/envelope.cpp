#include "evp/envelope.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json_util.hpp"

namespace evp {

namespace {

// Smallest integer s with 2^s >= x (x > 0).
long ceil_log2_rat(const Rat& x) {
  if (x <= 0) throw std::invalid_argument("ceil_log2 of a nonpositive rational");
  long s = 0;
  Rat v(1);
  while (v < x) {
    v *= 2;
    ++s;
  }
  while (v / 2 >= x) {
    v /= 2;
    --s;
  }
  return s;
}

bool is_ultrametric(const Space& s) {
  switch (s.kind()) {
    case Kind::Cantor:
    case Kind::Baire:
      return true;
    case Kind::Product: {
      for (const Space& part : s.parts())
        if (!is_ultrametric(part)) return false;
      return true;
    }
    case Kind::ClosedBall:
      return is_ultrametric(s.parent());
    default:
      return false;
  }
}

/// Exact band [dmin, dmax] for {d(x, y) : y in the closed cell}.  Generic
/// kinds get the triangle band; ultrametric kinds get the isosceles-exact
/// one (constant d(x, center) outside the cell, [0, radius] inside).  Both
/// ends are 1-Lipschitz in x, which downstream antitonicity relies on.
std::pair<Rat, Rat> dist_range(const Space& s, const Point& x, const Ball& cell) {
  Rat d = dist(s, x, cell.center);
  if (is_ultrametric(s)) {
    if (d > cell.radius) return {d, d};
    return {Rat(0), cell.radius};
  }
  Rat lo = d - cell.radius;
  if (lo < 0) lo = 0;
  return {std::move(lo), d + cell.radius};
}

/// Best available upper evidence at a point (exact value preferred).
ExtRat upper_at(const LscCode& f, const Point& x) {
  if (auto v = f.value_exact(x)) return *v;
  return f.upper_evidence(x);
}

/// One closed cover cell with everything a query needs, all independent of
/// the query point.
struct Cell {
  Ball ball;
  Bracket inf;              // honest f-infimum bracket over the closed cell
  ExtRat center_up;         // upper evidence at the cell center
  std::optional<Point> witness;
  ExtRat witness_up;        // upper evidence at the witness
};

struct Cover {
  Space space;
  Rat rho;                  // covering radius of the cell centers
  std::vector<Cell> cells;
  Rat f_lower;              // global lower bound of f
  std::optional<Ball> guard;  // region ball: prices candidates outside it
};

Cover build_cover(const LscCode& f, int resolution, const std::optional<Region>& region) {
  const Space& s = f.space();
  if (!f.honest())
    throw std::invalid_argument(
        "envelope needs an honest code (exact ball-infimum queries anchor the lower end)");
  const Region* reg = region ? &*region : nullptr;
  if (!s.compact() && !reg)
    throw std::invalid_argument("envelope on a non-compact kind needs a region");

  Cover cov{s, net_covering_radius(s, resolution, reg), {}, f.lower_bound(), std::nullopt};
  if (region && region->ball) cov.guard = *region->ball;

  std::vector<Point> centers = net(s, resolution, reg);
  cov.cells.reserve(centers.size());
  bool any_support = false;
  for (const Point& c : centers) {
    Ball b{c, cov.rho};
    Cell cell{b, f.honest_ball_inf(b, /*closed=*/true), upper_at(f, c), std::nullopt,
              ExtRat::inf()};
    if (auto w = f.honest_witness(b, /*closed=*/true)) {
      cell.witness_up = upper_at(f, *w);
      cell.witness = std::move(w);
    }
    if (cell.inf.hi.finite() || cell.center_up.finite() || cell.witness_up.finite())
      any_support = true;
    cov.cells.push_back(std::move(cell));
  }
  if (!any_support)
    throw EmptySupportError("envelope: no finite upper evidence in the covered region");
  return cov;
}

/// Bracket for the envelope at x from a prebuilt cover.  Every term below
/// is alpha-Lipschitz in x; lo additionally prices points outside the guard
/// ball, so the bracket is valid for the infimum over the whole space
/// whenever the cover's cells cover the guard region (compact kinds and
/// ball regions).
Bracket envelope_from_cover(const Cover& cov, const Rat& alpha, const Point& x) {
  std::optional<Rat> lo;
  ExtRat hi = ExtRat::inf();
  for (const Cell& cell : cov.cells) {
    auto [dmin, dmax] = dist_range(cov.space, x, cell.ball);
    Rat lo_term = cell.inf.lo + alpha * dmin;
    if (!lo || lo_term < *lo) lo = std::move(lo_term);
    hi = ext_min(hi, cell.inf.hi + alpha * dmax);
    if (cell.center_up.finite())
      hi = ext_min(hi,
                   ExtRat(cell.center_up.get() + alpha * dist(cov.space, x, cell.ball.center)));
    if (cell.witness && cell.witness_up.finite())
      hi = ext_min(hi, ExtRat(cell.witness_up.get() + alpha * dist(cov.space, x, *cell.witness)));
  }
  if (!hi.finite())
    throw EmptySupportError("envelope: no finite upper evidence in the covered region");
  Rat lo_final = lo ? *lo : cov.f_lower;
  if (cov.guard) {
    Rat margin = cov.guard->radius - dist(cov.space, x, cov.guard->center);
    if (margin < 0) margin = 0;
    lo_final = rat_min(lo_final, cov.f_lower + alpha * margin);
  }
  return Bracket(lo_final, hi);
}

// -------------------------------------------------------------------------

class EnvelopeCont final : public ContBackend {
 public:
  EnvelopeCont(LscCode f, Rat alpha, int resolution, std::optional<Region> region)
      : f_(std::move(f)),
        alpha_(std::move(alpha)),
        resolution_(resolution),
        region_(std::move(region)),
        cover_(build_cover(f_, resolution_, region_)) {
    if (alpha_ <= 0) throw std::invalid_argument("envelope: alpha must be positive");
  }

  const Space& space() const override { return f_.space(); }

  Bracket enclosure(const Ball& ball) const override {
    Bracket v = at(ball.center);
    Rat pad = alpha_ * ball.radius;
    return Bracket(v.lo - pad, ExtRat(v.hi.get() + pad));
  }

  Modulus modulus() const override { return lipschitz_modulus(alpha_); }

  const Region* enum_region() const override { return region_ ? &*region_ : nullptr; }

  std::string name() const override { return "envelope"; }

  Bracket at(const Point& x) const {
    std::string key = jsonu::point_to_json(x).dump();
    std::lock_guard<std::mutex> lock(mu_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    Bracket v = envelope_from_cover(cover_, alpha_, x);
    memo_.emplace(std::move(key), v);
    return v;
  }

 private:
  LscCode f_;
  Rat alpha_;
  int resolution_;
  std::optional<Region> region_;
  Cover cover_;
  mutable std::mutex mu_;
  mutable std::map<std::string, Bracket> memo_;
};

std::string region_serial(const std::optional<Region>& region, bool& ok) {
  ok = true;
  if (!region) return "";
  jsonu::json j;
  if (region->ball) j["ball"] = jsonu::ball_to_json(*region->ball);
  if (region->baire)
    j["baire"] = {{"branching", region->baire->branching}, {"depth", region->baire->depth}};
  if (region->explicit_net) ok = false;  // runtime-only nets do not serialize
  return j.dump();
}

}  // namespace

Bracket envelope_value(const EnvelopeQuery& q) {
  if (q.alpha <= 0) throw std::invalid_argument("envelope: alpha must be positive");
  if (!q.f.space().contains(q.x))
    throw std::invalid_argument("envelope: query point outside the space");
  Cover cov = build_cover(q.f, q.resolution, q.region);
  return envelope_from_cover(cov, q.alpha, q.x);
}

Bracket inf_conv(const ContCode& h, const LscCode& f, const Point& x, int resolution,
                 const std::optional<Region>& region) {
  const Space& hs = h.space();
  if (hs.kind() != Kind::Product || hs.parts().size() != 2)
    throw std::invalid_argument("inf_conv: kernel must live on a two-part product space");
  const Space& xs = hs.parts()[0];
  const Space& ys = hs.parts()[1];
  if (!ys.same_as(f.space()))
    throw std::invalid_argument("inf_conv: kernel's second factor differs from f's space");
  if (!xs.contains(x)) throw std::invalid_argument("inf_conv: query point outside the space");

  Cover cov = build_cover(f, resolution, region);

  std::optional<Rat> lo;
  ExtRat hi = ExtRat::inf();
  auto kernel_hi = [&](const Point& y) -> ExtRat {
    Point pair(std::vector<Point>{x, y});
    if (auto v = h.value_exact(pair)) return ExtRat(*v);
    return h.eval(pair, resolution + 2, 64).bracket.hi;
  };
  for (const Cell& cell : cov.cells) {
    Ball pb{Point(std::vector<Point>{x, cell.ball.center}), cov.rho};
    Bracket enc = h.enclosure(pb);
    Rat lo_term = enc.lo + cell.inf.lo;
    if (!lo || lo_term < *lo) lo = std::move(lo_term);
    hi = ext_min(hi, enc.hi + cell.inf.hi);
    if (cell.center_up.finite()) hi = ext_min(hi, kernel_hi(cell.ball.center) + cell.center_up);
    if (cell.witness && cell.witness_up.finite())
      hi = ext_min(hi, kernel_hi(*cell.witness) + cell.witness_up);
  }
  if (!hi.finite())
    throw EmptySupportError("inf_conv: no finite upper evidence in the covered region");
  return Bracket(lo ? *lo : cov.f_lower, hi);
}

Modulus envelope_modulus(const Modulus& kernel_modulus) { return kernel_modulus; }

Modulus lipschitz_modulus(const Rat& alpha) {
  if (alpha <= 0) throw std::invalid_argument("lipschitz_modulus: slope must be positive");
  return Modulus{ceil_log2_rat(alpha)};
}

ContCode envelope_code(const LscCode& f, const Rat& alpha, int resolution,
                       const std::optional<Region>& region) {
  auto backend = std::make_shared<EnvelopeCont>(f, alpha, resolution, region);
  std::string serial;
  bool region_ok = true;
  std::string reg = region_serial(region, region_ok);
  if (!f.serial().empty() && region_ok) {
    jsonu::json j{{"op", "envelope"},
                  {"f", jsonu::json::parse(f.serial())},
                  {"alpha", jsonu::rat_to_json(alpha)},
                  {"resolution", resolution}};
    if (!reg.empty()) j["region"] = jsonu::json::parse(reg);
    serial = j.dump();
  }
  return ContCode(std::move(backend), std::move(serial));
}

namespace {

class ScaledDistKernel final : public ContBackend {
 public:
  ScaledDistKernel(Space prod, Space part, Rat alpha)
      : prod_(std::move(prod)), part_(std::move(part)), alpha_(std::move(alpha)) {}

  const Space& space() const override { return prod_; }

  Bracket enclosure(const Ball& ball) const override {
    const auto& pair = ball.center.tuple();
    Rat d0 = dist(part_, pair[0], pair[1]);
    Rat lo = d0 - 2 * ball.radius;
    if (lo < 0) lo = 0;
    return Bracket(alpha_ * lo, ExtRat(alpha_ * (d0 + 2 * ball.radius)));
  }

  Modulus modulus() const override { return lipschitz_modulus(2 * alpha_); }

  std::optional<Rat> value_exact(const Point& p) const override {
    const auto& pair = p.tuple();
    return alpha_ * dist(part_, pair[0], pair[1]);
  }

  std::string name() const override { return "scaled-distance"; }

 private:
  Space prod_;
  Space part_;
  Rat alpha_;
};

}  // namespace

ContCode scaled_distance_kernel(const Space& x_space, const Rat& alpha) {
  if (alpha <= 0) throw std::invalid_argument("scaled_distance_kernel: slope must be positive");
  Space prod = Space::product({x_space, x_space});
  jsonu::json j{{"op", "scaled-distance"},
                {"space", jsonu::space_to_json(x_space)},
                {"alpha", jsonu::rat_to_json(alpha)}};
  return ContCode(std::make_shared<ScaledDistKernel>(std::move(prod), x_space, alpha), j.dump());
}

TransferReport transfer_critical(const LscCode& f, const Rat& alpha, const Rat& beta,
                                 const Point& x_star, const SearchParams& params,
                                 const Rat& tol) {
  if (!(0 < alpha && alpha < beta))
    throw std::invalid_argument("transfer_critical: need 0 < alpha < beta");
  ExtRat fu = upper_at(f, x_star);
  if (!fu.finite())
    throw UnsupportedPointError("transfer_critical: no finite evidence at the candidate");

  EnvelopeQuery q{f, beta, x_star, params.resolution, params.region};
  Bracket env = envelope_value(q);

  SearchParams crit = params;
  crit.epsilon = alpha;
  CriticalityCertificate cert = is_critical(f, x_star, crit);

  TransferReport report{x_star, alpha,         beta,
                        tol,    fu.get(),      env,
                        false,  std::move(cert), false};
  report.value_gap_ok = report.f_upper_x - env.lo <= tol;
  report.pass = report.value_gap_ok && report.criticality.pass;
  return report;
}

}  // namespace evp
