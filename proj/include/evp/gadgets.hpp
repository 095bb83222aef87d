#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evp/codes.hpp"
#include "evp/rational.hpp"
#include "evp/space.hpp"

// Reversal gadgets: function codes generated from combinatorial data --
// finite binary trees, injection tables, increasing rational streams,
// and families of bounded trees -- together with the decoding oracles
// that read the combinatorial content back out of certified critical
// points, explicit descent witnesses, and the C[0,1] pseudofibration /
// embedding machinery used to transport localized searches between
// spaces.  Everything here is exact: gadget values, witnesses, and
// decodes are rational computations with no rounding.

namespace evp {

// ---------------------------------------------------------------------------
// Finite trees.

/// Finite tree of sequences, explicitly listed.  Members are strings over
/// {0, .., branching_bound-1} of length <= depth_bound; the member list is
/// kept sorted (shortlex) and must be closed under prefixes and contain
/// the empty string.
struct TreeSpec {
  std::vector<Seq> members;
  std::uint32_t depth_bound = 8;
  std::uint32_t branching_bound = 2;

  bool member(const Seq& s) const;
  /// Strings in the tree with no one-step extension in the tree.
  std::vector<Seq> leaf_strings() const;
  /// True when some member has length >= depth, i.e. the tree reaches
  /// through that depth (closure supplies the connecting chain).
  bool has_path_through(std::uint32_t depth) const;
};

/// Validates and normalizes a member list (sorts, deduplicates, checks
/// prefix closure and the bounds).  Throws std::invalid_argument on
/// violations, naming the offending string.
TreeSpec make_tree(std::vector<Seq> members, std::uint32_t depth_bound,
                   std::uint32_t branching_bound);

// ---------------------------------------------------------------------------
// Tree-to-potential gadget (cantor / unit-interval targets).
//
// From a binary tree with no path through its depth bound, build the
// potential that dips below 2 over (doubled images of) the leaves and
// sits at 3 on the escape strings, so that every point admits an exact
// descent witness.  "No critical point" is a depth-relative statement:
// at finite depth the potential does attain its minimum, and points at
// an exact minimum witness themselves (see wkl_witness).

enum class WklTarget { Cantor, Unit };

struct WklLeaf {
  Seq sigma;                        // the leaf string in the tree
  Seq doubled;                      // zeros interleaved: doubled(2i+1) = sigma(i)
  std::vector<std::uint32_t> a_set; // blocked indices, ascending
  Rat value;                        // 2 - sum of 2^-2i over the blocked set
  Rat left, right;                  // dyadic interval of `doubled` (unit target)
};

struct WklGadget {
  TreeSpec tree;
  WklTarget target = WklTarget::Cantor;
  Space space = Space::cantor();
  std::vector<WklLeaf> leaves;   // shortlex order of the leaf strings
  std::vector<Seq> escapes;      // strings that just left the doubled tree
  Rat min_value;                 // least leaf value (global minimum of f)
  ContCode code;
};

/// Index i < |sigma|-1 is blocked when no tree member of length
/// |sigma|+1 extends sigma(0..i) followed by the flip of sigma(i+1).
/// Exposed for the brute-force cross-check in the tests.
std::vector<std::uint32_t> wkl_blocked_set(const TreeSpec& tree, const Seq& sigma);

/// Builds the gadget.  Requires a binary tree with no path through
/// depth_bound (checked exhaustively); rejects otherwise.
WklGadget wkl_gadget(const TreeSpec& tree, WklTarget target);

/// Exact descent witness: returns y with f(x) - f(y) >= d(x, y) as an
/// exact rational comparison.  Case split: points over an escape string
/// descend to the dip of the least-value leaf (drop >= 1); points over a
/// leaf follow the flipped continuation chosen by the largest unblocked
/// index when one exists, and otherwise scan all leaf dips for an exact
/// pass.  A point at an exact minimum of f has no strict descent at this
/// depth and receives y = x (the inequality holds with equality).
Point wkl_witness(const WklGadget& g, const Point& x);

// ---------------------------------------------------------------------------
// Injection-range gadget on the sequence space.
//
// For a finite injection table h and level count N, the potential
//   f(x) = 1 - sum over n < N of 2^(-2n - 1 + v_n(x(2^(n+1))))
// where coordinate 2^(n+1) is read as a bitmask coding a finite set D
// (bit a set iff a is in D) and v_n(D) counts the a in D with h(a) < n.
// Minimizing f forces each coded set to contain every a with h(a) < n,
// and the range of h is then read off the certified minimizer.

struct AcaInjectionGadget {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> table;  // (a, h(a))
  std::uint32_t levels = 3;                                    // N
  Space space = Space::baire();
  ContCode code;
};

/// Validates the table (a < 32 for the bitmask coding, both columns
/// duplicate-free) and levels <= 16, then builds the code.  The function
/// depends only on coordinates 2, 4, .., 2^N, so it is locally constant
/// at scale 2^-2^N and carries that (coarse but sound) modulus.
AcaInjectionGadget aca_injection_gadget(
    std::vector<std::pair<std::uint32_t, std::uint32_t>> table, std::uint32_t levels);

/// The intended minimizer: slot 2^(n+1) carries the bitmask of
/// {a : h(a) < n}, for every n <= levels.  (The slot for n = levels does
/// not influence f; it is the evidence the decoder reads the top level
/// from.)
Point aca_oracle_point(const AcaInjectionGadget& g);

/// Decoded range below `levels`: n is in the result iff the set coded at
/// slot 2^(n+2) contains an a with h(a) = n.
std::vector<std::uint32_t> aca_decode_range(const AcaInjectionGadget& g, const Point& x_star);

/// Single-coordinate perturbation net for certification: x itself plus
/// every rewrite of one influential slot to another subset of the
/// table's domain bits.
std::vector<Point> aca_perturbation_net(const AcaInjectionGadget& g, const Point& x);

// ---------------------------------------------------------------------------
// Supremum gadget on the unit interval.
//
// For a strictly increasing rational prefix c_0 < c_1 < .. < c_{K-1} in
// [0,1], the lower-semicontinuous potential
//   f(x) = 2   if x < c_{K-1}
//        = x   otherwise,
// whose infimum over [0,1] is exactly c_{K-1}: the desk-scale stand-in
// for "2 below the supremum of the stream, identity at and above it".
// The code is honest with zero slack: every ball infimum is answered
// exactly (the three certified lower-bound rules -- the left endpoint,
// the constant 2 when the ball sits below the stream top, and the
// largest stream element -- meet the attained value).

struct AcaSupGadget {
  std::vector<Rat> c;  // strictly increasing, values in [0,1]
  Space space = Space::unit_interval();
  LscCode code;
};

AcaSupGadget aca_sup_gadget(std::vector<Rat> c);

// ---------------------------------------------------------------------------
// Tree-family gadget on the sequence space.
//
// For trees T_0, .., T_{I-1}, the potential
//   f(x) = sum of 2^-i over the i < I whose slice (x)_i fails to thread
//          a path through depth_bound(T_i),
// with slices read along the pairing map.  The i-th term is locked to 0
// exactly when T_i reaches its full depth, so the optimal value -- and
// the slice content of any certified minimizer -- decodes path
// existence for every tree in the family.

/// Increasing pairing: pair_index(i, n) = (i+n)(i+n+1)/2 + n, a
/// bijection that is monotone in both arguments with pair_index(i, 0)
/// = i(i+1)/2 >= i (the distance bound on slice rewrites needs this).
std::uint64_t pair_index(std::uint32_t i, std::uint32_t n);

struct Pi11Gadget {
  std::vector<TreeSpec> trees;
  Space space = Space::baire();
  LscCode code;
};

Pi11Gadget pi11_gadget(std::vector<TreeSpec> trees);

/// Point threading, for every tree that has one, the shortlex-least
/// member of full depth along slice i; other coordinates zero.
Point pi11_oracle_point(const Pi11Gadget& g);

/// {i : slice i of x_star, cut at depth_bound(T_i), is a member of T_i}.
std::vector<std::uint32_t> pi11_decode(const Pi11Gadget& g, const Point& x_star);

/// Challenger net for certification: x itself plus, for every tree with
/// a full-depth member, the rewrite of slice i to thread it.
std::vector<Point> pi11_challenger_net(const Pi11Gadget& g, const Point& x);

// ---------------------------------------------------------------------------
// Pseudofibration of [a, b] by C[0,1], and the two isometric embeddings
// feeding it.
//
// iota(x, y) stores y at t = 0, ramps linearly to the embedded curve's
// left value at t = 1/2, and plays the embedded curve of x on [1/2, 1];
// pi reads the stored y back off (clamped).  Both are exact on
// piecewise-linear inputs, and the laws
//   pi(iota(x, y)) = y,
//   d(iota(x,y), iota(x',y')) = max(d(x,x'), |y - y'|),
//   |pi(z) - pi(z')| <= d(z, z')
// hold as rational identities.

/// The two-piece curve through (0, y), (1/2, fx(0)), then fx(2t - 1).
/// Rejects y outside [a, b].
Point pseudofib_iota(const Point& fx, const Rat& y, const Rat& a, const Rat& b);

/// clamp(g(0), [a, b]).
Rat pseudofib_pi(const Point& g, const Rat& a, const Rat& b);

/// The constant curve at height r (rejects r outside [0, 1]).  Distances
/// between embedded points equal |r - s| exactly.
Point embed_unit(const Rat& r);

/// Truncated hat-sum embedding of a sequence: the curve
///   sum over n < depth of 2^-n * hat(J(n, x(n)))
/// where J(n, m) = [1 - 2^-(n+1) - 2^-(n+m+1), 1 - 2^-(n+1) - 2^-(n+m+2)]
/// and hat(I) is the tent supported on I with peak 1 at its midpoint.
/// Distances between embedded points equal the sequence distance exactly
/// whenever the first disagreement is below `depth`.
Point embed_baire(const Point& x, std::uint32_t depth);

/// Endpoints of J(n, m) (exposed for the shape tests).
std::pair<Rat, Rat> embed_baire_interval(std::uint32_t n, std::uint32_t m);

/// Reads x(n) back off an embedded curve as the unique m with mass on
/// J(n, m); nullopt when the curve carries no level-n hat below the
/// entry cap.
std::optional<Seq> embed_baire_decode(const PLFunc& h, std::uint32_t depth,
                                      std::uint32_t entry_cap = 64);

// ---------------------------------------------------------------------------
// Lift of a localized search to C[0,1].
//
// f-tilde(z) = pi(z) + g(z), with g a concrete Urysohn stand-in:
// one minus nothing fancy -- g(h) = min(1, distance from h to the
// sampled graph slice), where the slice collects iota(embed(x'), y')
// over the sampled x' with certified f-lower-bound <= y' <= b.  g is
// 1-Lipschitz and exact on piecewise-linear curves, vanishes on the
// sampled slice, and is at most a declared slack above zero anywhere on
// the true graph; f-tilde is 2-Lipschitz with the matching modulus.

enum class EmbedKind { Unit, Baire };

struct LvpLift {
  LscCode f;             // original potential
  EmbedKind kind = EmbedKind::Unit;
  Rat a, b;              // value range carried by the curve at t = 0
  std::uint32_t depth = 4;                // baire embedding depth
  std::vector<Point> candidates;          // sampled source points
  std::vector<PLFunc> embedded;           // their embedded curves
  std::vector<Rat> value_floor;           // max(a, certified lower bound)
  Rat slack;             // g <= slack on the un-sampled part of the graph
  Space z_space = Space::c01();
  ContCode code;

  /// iota(embed(x), y) for this lift's embedding.
  Point lift_point(const Point& x, const Rat& y) const;
  Rat project(const Point& z) const;  // pi
};

/// Samples the source space at 2^-resolution (baire: entries and length
/// bounded by `baire_depth`), embeds the samples, and assembles the
/// lifted code.  Rejects empty effective support (no sample has a
/// certified finite lower bound <= b).
LvpLift lvp_to_fvp_lift(const LscCode& f, EmbedKind kind, const Rat& a, const Rat& b,
                        int resolution, long budget = 4096,
                        std::uint32_t baire_depth = 4);

}  // namespace evp
