#pragma once

// Lower alpha-envelopes (inf-convolutions with a scaled distance) as
// two-sided brackets and as codes.
//
// The envelope of a potential f at slope alpha is
//
//   f_alpha(x) = inf_y ( f(y) + alpha * d(x, y) ),
//
// the largest alpha-Lipschitz minorant construction: f_alpha <= f, f_alpha
// is alpha-Lipschitz, and minimizing f_alpha relates back to near-minimizing
// f.  Exact infima are out of reach for a code, so every query returns a
// bracket built from one fixed resolution-k cover of the (region of the)
// space:
//
//   lo = min over cover cells of  (honest cell-infimum lo + alpha * nearest
//        distance to the cell), guarded on regions by the escape cost
//        lower_bound(f) + alpha * (R - d(x, z0))^+;
//   hi = min over net points, cell brackets, and cell witnesses of
//        (upper evidence + alpha * distance terms).
//
// Both ends are minima of alpha-Lipschitz functions of x over data that do
// not depend on x, hence alpha-Lipschitz themselves; that gives the bracket
// width bound alpha*2^-k + 2*slack on compact kinds and makes the derived
// code's ball enclosures antitone.  The generalization inf_conv replaces
// alpha*d by an arbitrary uniformly continuous kernel h on X x Y.

#include <evp/codes.hpp>
#include <evp/search.hpp>

#include <optional>

namespace evp {

/// One envelope evaluation request.  f must be honest (exact-infimum ball
/// queries are what anchor the bracket's lower end); non-compact kinds need
/// a region.
struct EnvelopeQuery {
  LscCode f;
  Rat alpha{1};
  Point x;
  int resolution = 8;
  std::optional<Region> region;
};

/// Bracket for f_alpha(x) from a resolution-2^-k cover.
/// Throws std::invalid_argument when alpha <= 0, f is not honest, or a
/// non-compact kind comes without a region; EmptySupportError when no
/// finite upper evidence exists in the covered region.
Bracket envelope_value(const EnvelopeQuery& q);

/// General inf-convolution g(x) = inf_y ( h(x, y) + f(y) ) for a continuous
/// kernel h on the product X x Y and an honest f on Y.  Same cover
/// mechanism; h contributes through product-ball enclosures at (x, cell).
/// Errors as envelope_value.
Bracket inf_conv(const ContCode& h, const LscCode& f, const Point& x, int resolution,
                 const std::optional<Region>& region = std::nullopt);

/// The envelope inherits the kernel's modulus of uniform continuity
/// verbatim: the same map comes back.
Modulus envelope_modulus(const Modulus& kernel_modulus);

/// Modulus of an alpha-Lipschitz map: n |-> max(0, n + ceil(log2 alpha)).
Modulus lipschitz_modulus(const Rat& alpha);

/// The envelope as a continuous code on f's space: value brackets from
/// envelope_value, ball enclosures widened by alpha*radius (the envelope is
/// alpha-Lipschitz), modulus lipschitz_modulus(alpha).  The cover is built
/// once at construction; evaluations memoize per point.
ContCode envelope_code(const LscCode& f, const Rat& alpha, int resolution,
                       const std::optional<Region>& region = std::nullopt);

/// The kernel alpha * d(x, y) as a continuous code on X x X, for driving
/// inf_conv; enclosures are distance bands, modulus lipschitz_modulus of
/// the doubled slope (the kernel moves with both arguments).
ContCode scaled_distance_kernel(const Space& x_space, const Rat& alpha);

// ---------------------------------------------------------------------------
// Critical-point transfer f_beta -> f.

/// Outcome of transferring an alpha-critical point of the beta-envelope
/// back to f: (a) the value gap f(x*) - f_beta(x*) is at most tol (checked
/// as upper evidence minus envelope lo), and (b) x* passes the
/// alpha-criticality test for f itself.  pass = both.
struct TransferReport {
  Point x_star;
  Rat alpha;
  Rat beta;
  Rat tol;
  Rat f_upper_x;
  Bracket envelope_at_x;
  bool value_gap_ok = false;
  CriticalityCertificate criticality;
  bool pass = false;
};

/// Requires 0 < alpha < beta (throws std::invalid_argument otherwise;
/// params.epsilon is ignored in favor of alpha).  Criticality failures are
/// reported, not thrown: the report carries the falsifying witness.
TransferReport transfer_critical(const LscCode& f, const Rat& alpha, const Rat& beta,
                                 const Point& x_star, const SearchParams& params,
                                 const Rat& tol);

}  // namespace evp
