#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace evp {

/// Exact rational scalar. All metric, value and certificate arithmetic in
/// this library is carried out in `Rat`; floating point never enters a
/// verdict.
using Rat = mpq_class;

/// 2^k for any integer k (negative exponents give exact dyadic fractions).
inline Rat pow2(long k) {
  Rat r(1);
  if (k >= 0)
    mpz_mul_2exp(r.get_num_mpz_t(), mpz_class(1).get_mpz_t(),
                 static_cast<unsigned long>(k));
  else
    mpz_mul_2exp(r.get_den_mpz_t(), mpz_class(1).get_mpz_t(),
                 static_cast<unsigned long>(-k));
  return r;
}

inline Rat rat_abs(const Rat& x) { return x < 0 ? Rat(-x) : x; }

inline const Rat& rat_min(const Rat& a, const Rat& b) { return b < a ? b : a; }
inline const Rat& rat_max(const Rat& a, const Rat& b) { return a < b ? b : a; }

/// Parses "n", "n/d", decimal "0.25", and the dyadic shorthand "2^-8" /
/// "3*2^-10".  Throws std::invalid_argument on malformed input.
Rat parse_rat(const std::string& text);

/// Canonical text form "num/den" ("num" when den == 1).
std::string rat_str(const Rat& x);

/// Value in [b, +inf].  Lower-semicontinuous potentials are bounded below,
/// so only the upper end of the extended line is ever needed; +inf is a
/// real member (absence of finite upper evidence), not an error state.
struct ExtRat {
  bool infinite = false;
  Rat value;  // meaningful only when finite

  ExtRat() : infinite(true) {}
  ExtRat(const Rat& v) : infinite(false), value(v) {}  // NOLINT(implicit)
  static ExtRat inf() { return ExtRat(); }

  bool finite() const { return !infinite; }
  const Rat& get() const {
    if (infinite) throw std::logic_error("ExtRat: +inf has no finite value");
    return value;
  }
};

inline bool operator<(const ExtRat& a, const ExtRat& b) {
  if (a.infinite) return false;
  if (b.infinite) return true;
  return a.value < b.value;
}
inline bool operator<=(const ExtRat& a, const ExtRat& b) { return !(b < a); }
inline bool operator==(const ExtRat& a, const ExtRat& b) {
  if (a.infinite || b.infinite) return a.infinite == b.infinite;
  return a.value == b.value;
}
inline ExtRat ext_min(const ExtRat& a, const ExtRat& b) { return a < b ? a : b; }
inline ExtRat ext_max(const ExtRat& a, const ExtRat& b) { return a < b ? b : a; }
inline ExtRat operator+(const ExtRat& a, const Rat& b) {
  return a.infinite ? a : ExtRat(a.value + b);
}
inline ExtRat operator+(const ExtRat& a, const ExtRat& b) {
  if (a.infinite || b.infinite) return ExtRat::inf();
  return ExtRat(a.value + b.value);
}
/// factor must be positive (so +inf stays +inf).
inline ExtRat ext_scale(const ExtRat& a, const Rat& factor) {
  return a.infinite ? a : ExtRat(a.value * factor);
}
std::string ext_str(const ExtRat& x);

/// Two-sided enclosure lo <= v <= hi of an exact quantity v.  `hi` may be
/// +inf when no finite upper evidence exists yet.
struct Bracket {
  Rat lo;
  ExtRat hi;

  Bracket() = default;
  Bracket(const Rat& l, const ExtRat& h) : lo(l), hi(h) {
    if (h.finite() && h.value < l) throw std::invalid_argument("Bracket: hi < lo");
  }
  static Bracket exact(const Rat& v) { return Bracket(v, ExtRat(v)); }

  bool is_exact() const { return hi.finite() && hi.value == lo; }
  ExtRat width() const {
    return hi.finite() ? ExtRat(hi.value - lo) : ExtRat::inf();
  }
  /// Midpoint, the canonical single-value reading of a finite bracket.
  Rat mid() const {
    if (!hi.finite()) throw std::logic_error("Bracket: midpoint of unbounded bracket");
    return (lo + hi.value) / 2;
  }
  /// Refines by another enclosure of the same quantity.
  void intersect(const Bracket& other) {
    if (other.lo > lo) lo = other.lo;
    hi = ext_min(hi, other.hi);
    if (hi.finite() && hi.value < lo)
      throw std::logic_error("Bracket: intersection of disjoint enclosures");
  }
};

}  // namespace evp
