#include "evp/search.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace evp {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Scan order over net indices: identity for seed 0 (the fixed dense
/// enumeration order), otherwise a seeded Fisher-Yates shuffle.  Only the
/// descent's tie-breaking reads this; certificates always scan in net
/// order.
std::vector<std::size_t> scan_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (seed == 0) return idx;
  std::uint64_t state = seed;
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(splitmix64(state) % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

ExtRat upper_evidence_at(const LscCode& f, const Point& x) {
  if (auto v = f.value_exact(x)) return *v;
  return f.upper_evidence(x);
}

const Region* region_ptr(const SearchParams& params) {
  return params.region ? &*params.region : nullptr;
}

void require_searchable(const Space& s, const SearchParams& params, const char* who) {
  if (params.epsilon <= 0)
    throw std::invalid_argument(std::string(who) + ": epsilon must be positive");
  if (!s.compact() && !params.region)
    throw std::invalid_argument(std::string(who) + ": non-compact kind needs a region");
}

}  // namespace

// ---------------------------------------------------------------------------
// Verification.

CriticalityCertificate is_critical(const LscCode& f, const Point& x_star,
                                   const SearchParams& params, std::optional<Rat> delta_opt) {
  const Space& s = f.space();
  if (!s.contains(x_star))
    throw std::invalid_argument("is_critical: candidate outside the space");
  require_searchable(s, params, "is_critical");

  CriticalityCertificate cert;
  cert.x_star = x_star;
  cert.params = params;
  cert.delta = delta_opt ? *delta_opt : params.default_delta();
  cert.slack = params.effective_slack();
  cert.verification_resolution = params.resolution + 1;

  ExtRat fu = upper_evidence_at(f, x_star);
  if (!fu.finite())
    throw UnsupportedPointError("is_critical: no finite evidence at the candidate");
  cert.f_upper_x = fu.get();

  std::vector<Point> pts = net(s, cert.verification_resolution, region_ptr(params));
  cert.pass = true;
  cert.rows.reserve(pts.size());
  for (Point& y : pts) {
    Rat d = dist(s, x_star, y);
    ExtRat fl = f.value_lower(y, params.budget);
    bool exempt = d <= cert.delta;
    bool ok = exempt || !fl.finite() ||
              params.epsilon * d + fl.get() + cert.slack > cert.f_upper_x;
    if (!ok && cert.pass) {
      cert.pass = false;
      cert.witness = CriticalWitness{y, d, fl.get(), cert.f_upper_x};
    }
    cert.rows.push_back(EvidenceRow{std::move(y), std::move(d), std::move(fl)});
  }
  return cert;
}

CriticalityCertificate is_critical(const ContCode& f, const Point& x_star,
                                   const SearchParams& params, std::optional<Rat> delta_opt) {
  return is_critical(cont_to_lsc(f), x_star, params, delta_opt);
}

bool recheck_certificate(const CriticalityCertificate& cert) {
  bool pass = true;
  std::optional<std::size_t> first_fail;
  for (std::size_t i = 0; i < cert.rows.size(); ++i) {
    const EvidenceRow& row = cert.rows[i];
    if (row.distance <= cert.delta) continue;
    if (!row.f_lower.finite()) continue;
    if (cert.params.epsilon * row.distance + row.f_lower.get() + cert.slack > cert.f_upper_x)
      continue;
    if (pass) {
      pass = false;
      first_fail = i;
    }
  }
  if (pass != cert.pass) return false;
  if (pass) {
    if (cert.witness) return false;
  } else {
    if (!cert.witness) return false;
    const EvidenceRow& row = cert.rows[*first_fail];
    if (cert.witness->distance != row.distance) return false;
    if (!row.f_lower.finite() || cert.witness->f_lower_y != row.f_lower.get()) return false;
    if (cert.witness->f_upper_x != cert.f_upper_x) return false;
  }
  if (cert.localization) {
    const LocalizationCheck& lc = *cert.localization;
    bool ok = cert.params.epsilon * lc.distance <= lc.f_lower_x0 - lc.f_upper_x + cert.slack;
    if (ok != lc.pass) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Free search.

SearchResult fvp_search(const LscCode& f, const SearchParams& params) {
  const Space& s = f.space();
  require_searchable(s, params, "fvp_search");

  std::vector<Point> pts = net(s, params.resolution, region_ptr(params));
  if (pts.empty()) throw std::invalid_argument("fvp_search: empty search net");
  const std::size_t n = pts.size();

  SearchState state;
  std::vector<ExtRat> fl, fu;
  fl.reserve(n);
  fu.reserve(n);
  for (const Point& y : pts) {
    fl.push_back(f.value_lower(y, params.budget));
    fu.push_back(upper_evidence_at(f, y));
    state.evaluations += 2;
  }

  std::vector<std::size_t> order = scan_order(n, params.seed_order);
  std::optional<std::size_t> start;
  for (std::size_t i : order)
    if (fu[i].finite()) {
      start = i;
      break;
    }
  if (!start) throw EmptySupportError("fvp_search: no finite upper evidence on the net");

  const Rat& eps = params.epsilon;
  std::size_t a = *start;
  std::vector<Rat> da(n);  // distance row from the current iterate
  auto load_distances = [&](std::size_t from) {
    for (std::size_t b = 0; b < n; ++b) da[b] = dist(s, pts[from], pts[b]);
  };
  load_distances(a);

  // Net slices of S(a, q) = {b : eps*d(a,b) < f(a) - f(b) + q}:
  // the narrow one (certainly inside, via lower-at-a / upper-at-b evidence)
  // and the wide one (certainly containing every net member).
  auto in_narrow = [&](std::size_t b, const Rat& q) {
    if (b == a) return true;
    if (!fu[b].finite() || !fl[a].finite()) return false;
    return eps * da[b] < fl[a].get() - fu[b].get() + q;
  };
  auto in_wide = [&](std::size_t b, const Rat& q) {
    if (b == a) return true;
    if (!fl[b].finite()) return false;
    return eps * da[b] < fu[a].get() - fl[b].get() + q;
  };

  auto u_hi = [&](const Rat& q) -> Rat {
    ExtRat hi = ExtRat::inf();
    for (std::size_t b = 0; b < n; ++b)
      if (in_narrow(b, q)) hi = ext_min(hi, fu[b]);
    return hi.get();  // finite: a itself is a member
  };
  auto u_bracket = [&](const Rat& q) -> Bracket {
    std::optional<Rat> lo;
    for (std::size_t b = 0; b < n; ++b) {
      if (!in_wide(b, q) || !fl[b].finite()) continue;
      if (!lo || fl[b].get() < *lo) lo = fl[b].get();
    }
    return Bracket(*lo, ExtRat(u_hi(q)));
  };

  // R(a, p): the widest slice 2^-m whose min sits within p of the
  // saturated (2^-Mcap) one; recorded for the schedule's product.
  const long m_cap = params.resolution + 4;
  auto rate = [&](const Rat& p) -> Rat {
    Rat r_hat = u_hi(pow2(-m_cap));
    long m = 0;
    while (m < m_cap && r_hat - u_hi(pow2(-m)) > p) ++m;
    Rat value = pow2(-m);
    state.rate_cache.push_back(RateEntry{pts[a], p, value});
    return value;
  };

  state.iterates.push_back(pts[a]);
  Rat rate_product = rate(Rat(1));
  Rat q = pow2(-2) * rate_product;  // q_0 = 2^-2 * R(a_0, 1)
  state.q_schedule.push_back(q);

  std::size_t best = a;
  bool stopped = false;
  for (int iter = 0; iter < params.max_iters && !stopped; ++iter) {
    Bracket u = u_bracket(q);
    state.u_history.push_back(u);

    // Successor: first scan-order slice member, other than the current
    // iterate, with near-minimal upper evidence.  When no other member is
    // within the tightening band of the slice minimum, the iterate is an
    // isolated argmin of its own slice and the descent has converged.
    Rat tighten = pow2(-(iter + 1));
    std::size_t next = a;
    for (std::size_t b : order) {
      if (b == a || !in_narrow(b, q) || !fu[b].finite()) continue;
      if (ExtRat(fu[b]) < u.hi + tighten) {
        next = b;
        break;
      }
    }

    if (next == a) {
      state.converged = true;
      state.stop_reason = "fixed-point";
      stopped = true;
      break;
    }

    a = next;
    load_distances(a);
    state.iterates.push_back(pts[a]);
    if (fu[a].get() < fu[best].get()) best = a;

    // Schedule step: q_{n+1} = 2^-(n+3) * prod_{i <= n+1} R(a_i, 2^-i),
    // so every tail sums below 2^-n.
    rate_product *= rate(pow2(-(iter + 1)));
    q = pow2(-(iter + 3)) * rate_product;
    state.q_schedule.push_back(q);

    // Cauchy stop: remaining schedule mass plus the last bracket width
    // below the net resolution.
    Rat tail_bound = q + pow2(-(iter + 3));
    if (ExtRat(tail_bound) + u.width() < ExtRat(pow2(-params.resolution))) {
      state.converged = true;
      state.stop_reason = "cauchy";
      stopped = true;
    }
  }
  if (!stopped) state.stop_reason = "max-iters";

  SearchResult result{pts[best], is_critical(f, pts[best], params), std::move(state)};
  return result;
}

SearchResult fvp_search(const ContCode& f, const SearchParams& params) {
  return fvp_search(cont_to_lsc(f), params);
}

// ---------------------------------------------------------------------------
// Compact grid minimization.

MinResult fvp_min_compact(const ContCode& f, const SearchParams& params) {
  const Space& s = f.space();
  if (!s.compact())
    throw std::invalid_argument("fvp_min_compact: needs a compact kind");
  std::vector<Point> pts = net(s, params.resolution, region_ptr(params));
  Rat rho = net_covering_radius(s, params.resolution, region_ptr(params));

  std::optional<Rat> lo, hi;
  std::size_t best = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Bracket cell = f.enclosure(Ball{pts[i], rho});
    if (!lo || cell.lo < *lo) lo = cell.lo;
    Bracket value = f.eval(pts[i], params.resolution + 2, 64).bracket;
    if (value.hi.finite()) {
      Rat h = value.hi.get();
      if (!hi || h < *hi) {
        hi = std::move(h);
        best = i;
      }
    }
  }
  if (!hi) throw EmptySupportError("fvp_min_compact: no finite evaluations on the net");
  return MinResult{pts[best], Bracket(*lo, ExtRat(*hi))};
}

// ---------------------------------------------------------------------------
// Localized search.

SearchResult lvp_search(const LscCode& f, const Point& x0, const SearchParams& params) {
  const Space& s = f.space();
  if (!s.contains(x0)) throw std::invalid_argument("lvp_search: x0 outside the space");
  require_searchable(s, params, "lvp_search");
  ExtRat c = upper_evidence_at(f, x0);
  if (!c.finite()) throw UnsupportedPointError("lvp_search: no finite evidence at x0");
  Rat cap = c.get();

  // Comparison function: f off the localization set C is raised to at
  // least eps*d(., x0) + c, so a critical point of the maximum is forced
  // into C; on C the maximum agrees with f (potentials are nonnegative).
  ClosedSet C = sublevel_closed_set(f, x0, params.epsilon, cap);
  LscCode ramp = lsc_add_scaled_distance(lsc_const(s, cap), x0, params.epsilon);
  LscCode off_part = lsc_zero_on_closed(ramp, C, std::min<long>(params.budget, 4096));
  LscCode tilde = lsc_combine(CombineOp::Max, f, off_part);

  SearchResult descent = fvp_search(tilde, params);

  // Verdicts come from the original f, not the comparison function.
  CriticalityCertificate cert = is_critical(f, descent.x_star, params);
  ExtRat fl0 = f.value_lower(x0, params.budget);
  LocalizationCheck lc;
  lc.x0 = x0;
  lc.distance = dist(s, x0, descent.x_star);
  lc.f_lower_x0 = fl0.finite() ? fl0.get() : f.lower_bound();
  lc.f_upper_x = cert.f_upper_x;
  lc.pass = params.epsilon * lc.distance <= lc.f_lower_x0 - lc.f_upper_x + cert.slack;
  cert.localization = lc;

  return SearchResult{descent.x_star, std::move(cert), std::move(descent.state)};
}

SearchResult lvp_search(const ContCode& f, const Point& x0, const SearchParams& params) {
  return lvp_search(cont_to_lsc(f), x0, params);
}

// ---------------------------------------------------------------------------
// Reductions.

LscCode bound_reduce(const LscCode& f, const Point& x0) {
  if (!f.space().contains(x0))
    throw std::invalid_argument("bound_reduce: x0 outside the space");
  ExtRat c = upper_evidence_at(f, x0);
  if (!c.finite()) throw UnsupportedPointError("bound_reduce: no finite evidence at x0");
  return min_const_lsc(f, c.get());
}

LscCode scale_reduce(const LscCode& f, const Rat& epsilon) {
  if (epsilon <= 0) throw std::invalid_argument("scale_reduce: epsilon must be positive");
  return scale_lsc(f, Rat(1) / epsilon);
}

}  // namespace evp
