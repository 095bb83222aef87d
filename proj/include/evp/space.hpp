#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "evp/rational.hpp"

namespace evp {

/// Continuous piecewise-linear function on [0,1], the dense representatives
/// used for the space of continuous functions under the sup norm.  Knots
/// have strictly increasing abscissae with knots.front().first == 0 and
/// knots.back().first == 1; between knots the function interpolates
/// linearly, so every query below is answered exactly.
struct PLFunc {
  std::vector<std::pair<Rat, Rat>> knots;

  PLFunc() = default;
  explicit PLFunc(std::vector<std::pair<Rat, Rat>> k);
  static PLFunc constant(const Rat& value);

  Rat eval(const Rat& t) const;
  /// Removes interior knots that lie on the segment through their
  /// neighbours; two PLFuncs are equal as functions iff their normalized
  /// knot lists are identical.
  PLFunc normalized() const;
  /// sup |f - g| over [0,1]; exact because the difference is piecewise
  /// linear with extrema at the merged knot set.
  static Rat sup_diff(const PLFunc& f, const PLFunc& g);
  /// sup |f| over [l, r] (0 <= l <= r <= 1).
  Rat sup_abs_on(const Rat& l, const Rat& r) const;
};

using Seq = std::vector<std::uint32_t>;

/// A point of a coded space, always finitely represented:
///   interval kinds  -> exact rational
///   cantor / baire  -> finite sequence, implicitly padded with zeros
///   c01             -> piecewise-linear function
///   product         -> tuple of component points
class Point {
 public:
  Point() : v_(Rat(0)) {}
  explicit Point(Rat r) : v_(std::move(r)) {}
  explicit Point(Seq s) : v_(std::move(s)) {}
  explicit Point(PLFunc f) : v_(std::move(f)) {}
  explicit Point(std::vector<Point> parts) : v_(std::move(parts)) {}

  bool is_rat() const { return std::holds_alternative<Rat>(v_); }
  bool is_seq() const { return std::holds_alternative<Seq>(v_); }
  bool is_pl() const { return std::holds_alternative<PLFunc>(v_); }
  bool is_tuple() const { return std::holds_alternative<std::vector<Point>>(v_); }

  const Rat& rat() const { return std::get<Rat>(v_); }
  const Seq& seq() const { return std::get<Seq>(v_); }
  const PLFunc& pl() const { return std::get<PLFunc>(v_); }
  const std::vector<Point>& tuple() const { return std::get<std::vector<Point>>(v_); }

  /// Entry n of a sequence point, with the zero tail made explicit.
  std::uint32_t seq_at(std::size_t n) const {
    const Seq& s = seq();
    return n < s.size() ? s[n] : 0u;
  }

 private:
  std::variant<Rat, Seq, PLFunc, std::vector<Point>> v_;
};

/// Open metric ball with explicit center and exact rational radius.
struct Ball {
  Point center;
  Rat radius;
};

enum class Kind {
  UnitInterval,
  ClosedInterval,
  Cantor,
  Baire,
  Product,
  C01,
  ClosedBall,
};

/// Immutable descriptor of a coded complete separable metric space.  The
/// dense points are exactly the representable `Point`s of the kind; all
/// distances between them are exact rationals.
class Space {
 public:
  static Space unit_interval();
  static Space closed_interval(const Rat& a, const Rat& b);
  static Space cantor();
  static Space baire();
  static Space product(std::vector<Space> parts);
  static Space c01();
  static Space closed_ball(const Space& parent, const Point& center, const Rat& radius);

  Kind kind() const { return n_->kind; }
  const Rat& lo() const { return n_->a; }
  const Rat& hi() const { return n_->b; }
  const std::vector<Space>& parts() const { return n_->parts; }
  const Space& parent() const { return *n_->parent; }
  const Point& ball_center() const { return n_->center; }
  const Rat& ball_radius() const { return n_->radius; }

  /// True for the kinds with total finite nets at every resolution.
  bool compact() const;
  /// Exact membership test (also validates representation invariants).
  bool contains(const Point& p) const;
  std::string describe() const;

  bool same_as(const Space& other) const;

 private:
  struct Node {
    Kind kind;
    Rat a, b;                        // interval endpoints
    std::vector<Space> parts;        // product components
    std::shared_ptr<Space> parent;   // closed-ball carrier
    Point center;
    Rat radius;
  };
  explicit Space(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  std::shared_ptr<const Node> n_;
};

/// Exact distance between two points of `s`.  Sequence kinds use
/// d(x, y) = max {2^-n : x(n) != y(n)} (0 when equal), products take the
/// max over components, c01 the sup norm.
Rat dist(const Space& s, const Point& p, const Point& q);

bool point_eq(const Space& s, const Point& p, const Point& q);

bool in_open_ball(const Space& s, const Ball& b, const Point& p);
bool in_closed_ball(const Space& s, const Ball& b, const Point& p);

/// Formal inclusion B(inner) <I B(outer):  d(centers) + r_inner < r_outer.
/// Implies topological inclusion of the closed inner ball in the open
/// outer ball.
bool strictly_inside(const Space& s, const Ball& inner, const Ball& outer);

/// Caller-supplied bounds that carve a finite fragment out of a
/// non-compact kind, or restrict a compact one.
struct BaireBounds {
  std::uint32_t branching = 2;
  std::uint32_t depth = 4;
};

struct ExplicitNet {
  std::vector<Point> points;
  Rat covering_radius;  // declared: every point of interest within this
};

struct Region {
  std::optional<Ball> ball;            // restrict to a closed metric ball
  std::optional<BaireBounds> baire;    // finite fragment of baire
  std::optional<ExplicitNet> explicit_net;  // caller-supplied net (c01)
};

/// Finite 2^-k-net of `s` (restricted by `region` when given), in the fixed
/// scan order: ascending for intervals, lexicographic for sequence kinds
/// and products.  Every relevant point lies within
/// net_covering_radius(s, k, region) <= 2^-k of some net point.
std::vector<Point> net(const Space& s, int k, const Region* region = nullptr);

Rat net_covering_radius(const Space& s, int k, const Region* region = nullptr);

}  // namespace evp
