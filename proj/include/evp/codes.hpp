#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evp/rational.hpp"
#include "evp/space.hpp"

namespace evp {

/// Uniform-continuity witness h(n) = max(0, n + shift):
/// d(x, y) < 2^-h(n) implies |f(x) - f(y)| < 2^-n.
struct Modulus {
  long shift = 0;

  long at(long n) const { return n + shift > 0 ? n + shift : 0; }
  Rat input_radius(long n) const { return pow2(-at(n)); }

  /// Oscillation bound: d(x, y) <= rho implies |f(x) - f(y)| <= result.
  /// Returns 2^-n for the deepest n whose input radius still exceeds rho.
  ExtRat osc_bound(const Rat& rho) const {
    if (rho == 0) return ExtRat(Rat(0));
    if (rho >= input_radius(0)) return ExtRat::inf();
    long n = 0;
    while (n < 512 && rho < input_radius(n + 1)) ++n;
    return ExtRat(pow2(-n));
  }

  /// Modulus of factor * f for factor > 0.
  Modulus scaled(const Rat& factor) const;
};

/// One enumerated entry of a continuous-function code:
/// the code asserts f(ball) to lie inside [lo, hi].
struct ContItem {
  Ball ball;
  Rat lo, hi;
};

/// One enumerated entry of a lower-semicontinuous code:
/// the code asserts f >= q on the ball.
struct LscItem {
  Ball ball;
  Rat q;
};

struct EvalResult {
  Bracket bracket;
  bool met_precision = false;
};

// ---------------------------------------------------------------------------

/// Behaviour of a continuous-function code.  An implementation must keep
/// `enclosure` sound (it contains the exact range of f on the ball
/// intersected with the space) and antitone under formal ball inclusion;
/// the enumeration laws then hold by construction and are verified by the
/// test suite on every fixture.
class ContBackend {
 public:
  virtual ~ContBackend() = default;
  virtual const Space& space() const = 0;
  virtual Bracket enclosure(const Ball& ball) const = 0;
  virtual Modulus modulus() const = 0;
  /// Exact value at a representable point, when the backend can produce it.
  virtual std::optional<Rat> value_exact(const Point& x) const {
    (void)x;
    return std::nullopt;
  }
  /// True when `enclosure` returns the exact range (up to closure).
  virtual bool exact_ranges() const { return false; }
  /// A minimizer of f over the closed ball with its exact value, when the
  /// backend can locate one (exact-range backends on interval kinds).
  virtual std::optional<std::pair<Point, Rat>> range_min_point(const Ball& ball) const {
    (void)ball;
    return std::nullopt;
  }
  /// Region carving the enumeration domain out of non-compact kinds.
  virtual const Region* enum_region() const { return nullptr; }
  virtual int enum_levels() const { return 10; }
  virtual std::string name() const = 0;
};

class ContCode {
 public:
  explicit ContCode(std::shared_ptr<const ContBackend> b, std::string serial = "")
      : b_(std::move(b)), serial_(std::move(serial)) {}

  const Space& space() const { return b_->space(); }
  Modulus modulus() const { return b_->modulus(); }
  Bracket enclosure(const Ball& ball) const { return b_->enclosure(ball); }
  std::optional<Rat> value_exact(const Point& x) const { return b_->value_exact(x); }
  bool exact_ranges() const { return b_->exact_ranges(); }
  const ContBackend& backend() const { return *b_; }
  std::shared_ptr<const ContBackend> backend_ptr() const { return b_; }

  /// Two-sided evaluation: shrinks enclosing balls around x, intersecting
  /// the enclosures, until the bracket is narrower than 2^-precision or the
  /// budget runs out.  Brackets are nested as precision increases.
  EvalResult eval(const Point& x, int precision, long budget = 64) const;

  /// The dyadic relation "ball |- (u, v)" with its closure rules: answers
  /// whether the code certifies f(ball) inside [u, v].
  bool maps(const Ball& ball, const Rat& u, const Rat& v) const;

  /// Budgeted prefix of the item enumeration (level-by-level ball sweeps).
  std::vector<ContItem> items(long budget) const;

  /// Construction recipe as JSON text; empty when the code was built
  /// in-process from non-serializable parts.
  const std::string& serial() const { return serial_; }

 private:
  std::shared_ptr<const ContBackend> b_;
  std::string serial_;
};

// ---------------------------------------------------------------------------

/// Behaviour of a lower-semicontinuous code with values in [b, +inf].
/// `ball_bound` must be monotone under formal ball inclusion (shrinking the
/// ball never weakens the bound); the enumeration laws follow.
class LscBackend {
 public:
  virtual ~LscBackend() = default;
  virtual const Space& space() const = 0;
  /// Certified lower bound for f on the open ball; +inf asserts the ball
  /// misses the (finite-valued) support entirely.
  virtual ExtRat ball_bound(const Ball& ball) const = 0;
  /// Finite witness f(x) <= result, or +inf when none exists.
  virtual ExtRat upper_evidence(const Point& x) const = 0;
  virtual std::optional<ExtRat> value_exact(const Point& x) const {
    (void)x;
    return std::nullopt;
  }
  virtual Rat lower_bound() const = 0;  // global b <= f

  /// Honest capability: a bracket around inf_ball f (lo from the
  /// enumeration rules, hi true).  `closed` queries the closed ball; the
  /// closed form is the workhorse, and derived codes may answer open
  /// queries conservatively (hi = +inf) when they cannot certify them.
  virtual bool honest() const { return false; }
  virtual std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const {
    (void)ball;
    (void)closed;
    return std::nullopt;
  }
  /// A point of the closed ball realizing the honest upper end:
  /// upper_evidence(w) <= ball_inf(ball, closed)->hi.  Lets combiners keep
  /// honesty (they re-evaluate each other's witnesses).
  virtual std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const {
    (void)ball;
    (void)closed;
    return std::nullopt;
  }
  /// Declared resolution slack of the honest answers (0 = exact).
  virtual Rat honest_slack() const { return Rat(0); }

  virtual const Region* enum_region() const { return nullptr; }
  virtual int enum_levels() const { return 10; }
  virtual std::string name() const = 0;
};

class LscCode {
 public:
  explicit LscCode(std::shared_ptr<const LscBackend> b, std::string serial = "")
      : b_(std::move(b)), serial_(std::move(serial)) {}

  const Space& space() const { return b_->space(); }
  ExtRat ball_bound(const Ball& ball) const { return b_->ball_bound(ball); }
  ExtRat upper_evidence(const Point& x) const { return b_->upper_evidence(x); }
  std::optional<ExtRat> value_exact(const Point& x) const { return b_->value_exact(x); }
  Rat lower_bound() const { return b_->lower_bound(); }
  bool honest() const { return b_->honest(); }
  Rat honest_slack() const { return b_->honest_slack(); }
  const LscBackend& backend() const { return *b_; }
  std::shared_ptr<const LscBackend> backend_ptr() const { return b_; }

  /// Best certified lower bound for f(x) within the budget: the enumeration
  /// sup over balls around x, short-circuited by the exact value when the
  /// backend has one.  Monotone in the budget.
  ExtRat value_lower(const Point& x, long budget) const;

  /// The relation "ball |- q" with its closure rules (shrinking balls,
  /// lowering q).
  bool holds(const Ball& ball, const Rat& q) const;

  /// Exact-infimum query of an honest code.  Throws unless honest().
  Bracket honest_ball_inf(const Ball& ball, bool closed = true) const;
  std::optional<Point> honest_witness(const Ball& ball, bool closed = true) const {
    return b_->ball_inf_witness(ball, closed);
  }

  std::vector<LscItem> items(long budget) const;

  const std::string& serial() const { return serial_; }

 private:
  std::shared_ptr<const LscBackend> b_;
  std::string serial_;
};

// ---------------------------------------------------------------------------
// Closed sets, coded by enumerating balls of the complement.

struct ClosedSet {
  Space space;
  /// Exact membership decision (desk-scale sets carry one).
  std::function<bool(const Point&)> member;
  /// Prefix of the complement-ball enumeration: every enumerated open ball
  /// misses the set; the union exhausts the complement in the limit.
  std::function<std::vector<Ball>(long)> complement_balls;
  std::string serial;
};

/// {x} as a closed set.
ClosedSet closed_point_set(const Space& s, const Point& x);

/// Sublevel set {x : eps * d(x, x0) + f(x) <= threshold}; closed because
/// the left side is lower semicontinuous.
ClosedSet sublevel_closed_set(const LscCode& f, const Point& x0, const Rat& eps,
                              const Rat& threshold);

// ---------------------------------------------------------------------------
// Factories.

ContCode const_cont(const Space& s, const Rat& value);

/// Exact piecewise-linear function on an interval space, knots in absolute
/// coordinates spanning [lo, hi].
ContCode pl_cont(const Space& s, std::vector<std::pair<Rat, Rat>> knots);

/// Code from finitely many exact samples plus a declared modulus.  Rejects
/// sample pairs violating the modulus, naming the offending pair.
ContCode cont_from_samples(const Space& s, std::vector<std::pair<Point, Rat>> samples,
                           Modulus modulus);

/// Glues piece codes given on open regions (finite unions of balls).
/// Pieces must agree within bracket overlap on shared net points at the
/// working resolution; incompatibility is rejected.
ContCode patch(const Space& s,
               std::vector<std::pair<std::vector<Ball>, ContCode>> pieces,
               int working_resolution);

ContCode scale_cont(const ContCode& f, const Rat& factor);
ContCode min_const_cont(const ContCode& f, const Rat& cap);

// ---------------------------------------------------------------------------

/// Open-piece/breakpoint description of a piecewise-affine lsc function on
/// an interval space: piece i is affine (or +inf) on the open interval
/// (cuts[i], cuts[i+1]), values[i] is the exact value at cuts[i].
struct PiecewiseLscSpec {
  struct Piece {
    bool infinite = false;
    Rat c0, c1;  // value c0 + c1 * x when finite
  };
  std::vector<Rat> cuts;
  std::vector<Piece> pieces;
  std::vector<ExtRat> values;
};

/// Honest (exact ball infima) lsc code from a piecewise-affine description.
/// Rejects descriptions that are not lower semicontinuous.
LscCode pl_lsc(const Space& s, PiecewiseLscSpec spec);

LscCode lsc_const(const Space& s, const Rat& value);

/// Views a continuous code as an lsc one (honest when the continuous
/// enclosures are exact).
LscCode cont_to_lsc(const ContCode& f);

/// g = 0 on C, h off C (h a potential, h >= 0).  Off-C evidence comes from
/// the complement enumeration of C scanned up to `enum_budget`.
LscCode lsc_zero_on_closed(const LscCode& h, const ClosedSet& C, long enum_budget = 4096);

enum class CombineOp { Sum, Max, Min };
LscCode lsc_combine(CombineOp op, const LscCode& f, const LscCode& g);

/// f + eps * d(., x0); honest when f is.
LscCode lsc_add_scaled_distance(const LscCode& f, const Point& x0, const Rat& eps);

/// Recovers an lsc function from a closed epigraph code on X x R.  The
/// caller asserts the global lower bound; upper evidence is scanned on the
/// value grid at 2^-upper_scan_resolution.
LscCode epigraph_to_lsc(const ClosedSet& epi, const Space& domain, const Rat& value_lo,
                        const Rat& value_hi, int upper_scan_resolution);

/// Wraps a code on a compact space with honest ball-infimum answers
/// obtained by covering queried balls with resolution-2^-res pieces.
/// Sound (never over-reports) and complete up to the modulus slack at
/// 2^-res.
LscCode honest_promote_compact(const LscCode& f, int resolution);

LscCode scale_lsc(const LscCode& f, const Rat& factor);
LscCode min_const_lsc(const LscCode& f, const Rat& cap);

}  // namespace evp
