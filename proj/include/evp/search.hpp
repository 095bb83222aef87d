#pragma once

// Critical-point search and verification.
//
// An eps-critical point of f is an x* such that eps*d(x*, y) <= f(x*) - f(y)
// forces y = x*; equivalently, every strict move away from x* costs more in
// distance than it gains in value.  On a coded space we can neither evaluate
// f exactly nor quantify over all y, so both the search and its verdicts are
// finitized:
//
//   * quantifiers run over resolution-k nets (plus an optional region);
//   * f-values are replaced by certified evidence (upper at the candidate,
//     lower at the challengers), compared in the conservative direction;
//   * the clause "y = x*" becomes d(x*, y) <= delta for an identification
//     radius delta;
//   * every verdict ships as a self-contained certificate whose inequality
//     rows re-check by pure rational arithmetic.
//
// The searcher runs a descent through approximate sublevel slices
// S(a, q) = {b : eps*d(a, b) < f(a) - f(b) + q} with a recorded rational
// schedule q_n whose tails telescope (sum_{k>=n} q_k < 2^-n), then certifies
// the best iterate against an independent net one resolution finer than the
// search net.  Verdicts come only from certificates, never from the descent
// itself.

#include <evp/codes.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evp {

/// A criticality query names a point of the space whose f-value evidence is
/// infinite (nothing finite is known there, so no test applies).
struct UnsupportedPointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The function has no finite upper evidence anywhere in the searched
/// region: every descent hypothesis fails vacuously.
struct EmptySupportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------

struct SearchParams {
  Rat epsilon{1};
  /// Net fineness: search nets are 2^-resolution, verification nets one
  /// step finer.
  int resolution = 8;
  /// Evidence budget per point (ball enumeration depth for lower bounds).
  long budget = 4096;
  int max_iters = 64;
  /// Comparison tolerance folded into every certificate inequality.
  /// Unset = total evidence width bound 2^(-resolution+1).
  std::optional<Rat> slack;
  /// Restricts nets to a subset of the space; required on non-compact kinds.
  std::optional<Region> region;
  /// Permutation seed for the descent's scan order (0 = the fixed dense
  /// enumeration order).  Changes which iterate is picked among eligible
  /// ones; never affects certificate verdicts.
  std::uint64_t seed_order = 0;

  Rat effective_slack() const { return slack ? *slack : pow2(-resolution + 1); }
  Rat default_delta() const { return pow2(-resolution + 1); }
};

// ---------------------------------------------------------------------------
// Certificates.

/// One challenger row of a certificate: the exact data entering the test
/// "eps * distance + f_lower + slack > f_upper(x*)" for net point y.
/// Rows with distance <= delta are identified with x* and exempt.
struct EvidenceRow {
  Point y;
  Rat distance;    // d(x*, y), exact
  ExtRat f_lower;  // certified lower evidence for f(y)
};

/// First failing challenger, echoed with the numbers that falsify the test.
struct CriticalWitness {
  Point y;
  Rat distance;
  Rat f_lower_y;
  Rat f_upper_x;
};

/// Localized variant's extra check eps*d(x0,x*) <= f(x0) - f(x*) + slack,
/// verified conservatively (lower evidence at x0, upper at x*).
struct LocalizationCheck {
  Point x0;
  Rat distance;  // d(x0, x*)
  Rat f_lower_x0;
  Rat f_upper_x;
  bool pass = false;
};

struct CriticalityCertificate {
  Point x_star;
  SearchParams params;  // as used by the verifier
  Rat delta;            // identification radius actually applied
  Rat slack;            // tolerance actually applied
  int verification_resolution = 0;
  Rat f_upper_x;  // finite upper evidence at x_star
  bool pass = false;
  std::optional<CriticalWitness> witness;  // set iff !pass
  /// Full verification net with its evidence, in net order: the verdict
  /// re-derives from these rows alone.
  std::vector<EvidenceRow> rows;
  std::optional<LocalizationCheck> localization;
};

// ---------------------------------------------------------------------------
// Search state: the descent's recorded trace.

/// Recorded rate value R(a, p): the largest slice width q = 2^-m whose
/// min-bracket sits within p of the saturated one.
struct RateEntry {
  Point a;
  Rat p;
  Rat value;
};

struct SearchState {
  std::vector<Point> iterates;     // a_0, a_1, ...
  std::vector<Rat> q_schedule;     // q_0, q_1, ...
  std::vector<Bracket> u_history;  // net-restricted min over S(a_n, q_n)
  std::vector<RateEntry> rate_cache;
  long evaluations = 0;  // evidence queries spent
  bool converged = false;
  std::string stop_reason;
};

struct SearchResult {
  Point x_star;
  CriticalityCertificate certificate;
  SearchState state;
};

/// Grid minimization output: the selected point and a two-sided bracket for
/// the global minimum (cells below, evaluations above).
struct MinResult {
  Point x;
  Bracket value;
};

// ---------------------------------------------------------------------------
// Verification.

/// Checks eps-criticality of x_star over a net one resolution finer than
/// params.resolution: pass iff every net point y with d(x*, y) > delta
/// satisfies eps*d(x*, y) + f_lower(y) + slack > f_upper(x*), exactly.
/// delta defaults to 2^(-resolution+1).
/// Throws UnsupportedPointError when f has no finite upper evidence at
/// x_star.
CriticalityCertificate is_critical(const LscCode& f, const Point& x_star,
                                   const SearchParams& params,
                                   std::optional<Rat> delta = std::nullopt);
CriticalityCertificate is_critical(const ContCode& f, const Point& x_star,
                                   const SearchParams& params,
                                   std::optional<Rat> delta = std::nullopt);

/// Re-derives a certificate's verdict from its own rows (pure arithmetic,
/// no code evaluation): true when the recorded pass/witness data is
/// internally consistent with the recorded inequalities.
bool recheck_certificate(const CriticalityCertificate& cert);

// ---------------------------------------------------------------------------
// Searches.

/// Free search: descends through S(a_n, q_n) slices from the first
/// supported net point, then certifies the running-best iterate (smallest
/// upper evidence) at resolution+1.  The certificate may fail at budget
/// exhaustion; callers retry with a larger budget or finer resolution.
/// Throws EmptySupportError when no net point has finite upper evidence.
SearchResult fvp_search(const LscCode& f, const SearchParams& params);
SearchResult fvp_search(const ContCode& f, const SearchParams& params);

/// Compact-kind grid minimization: the net argmin by upper evaluation,
/// bracketed below by cell enclosures covering the space.
MinResult fvp_min_compact(const ContCode& f, const SearchParams& params);

/// Localized search from x0: descends on the comparison function
///   max(f, g),  g = 0 on C, eps*d(., x0) + c off C,
///   C = {x : f(x) + eps*d(x, x0) <= c},  c = upper evidence for f(x0),
/// whose critical points are forced into C, then certifies against the
/// original f and records the localization check
/// eps*d(x0, x*) <= f(x0) - f(x*) + slack.
/// Throws UnsupportedPointError when f has no finite upper evidence at x0.
SearchResult lvp_search(const LscCode& f, const Point& x0, const SearchParams& params);
SearchResult lvp_search(const ContCode& f, const Point& x0, const SearchParams& params);

// ---------------------------------------------------------------------------
// Reductions.

/// Caps f at its value evidence at x0: min(f, c) with c upper evidence for
/// f(x0).  Criticality of the capped code at points below the cap transfers
/// to f; re-verify with is_critical on f.
LscCode bound_reduce(const LscCode& f, const Point& x0);

/// Rescales to unit epsilon: f' = f / epsilon.  A point passes the
/// 1-criticality test for f' iff it passes the epsilon-test for f, with
/// slack scaled accordingly.
LscCode scale_reduce(const LscCode& f, const Rat& epsilon);

}  // namespace evp
