#include "evp/gadgets.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "evp/envelope.hpp"
#include "evp/search.hpp"
#include "json_util.hpp"

namespace evp {
namespace {

using jsonu::json;

std::string seq_str(const Seq& s) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << ",";
    out << s[i];
  }
  out << ")";
  return out.str();
}

bool shortlex_less(const Seq& a, const Seq& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

bool is_prefix(const Seq& p, const Seq& s) {
  if (p.size() > s.size()) return false;
  return std::equal(p.begin(), p.end(), s.begin());
}

/// Entry i of a sequence point under the implicit zero padding.
std::uint32_t at_padded(const Seq& s, std::size_t i) { return i < s.size() ? s[i] : 0u; }

}  // namespace

// ---------------------------------------------------------------------------
// Trees.

bool TreeSpec::member(const Seq& s) const {
  return std::binary_search(members.begin(), members.end(), s, shortlex_less);
}

std::vector<Seq> TreeSpec::leaf_strings() const {
  std::vector<Seq> out;
  for (const auto& s : members) {
    bool has_child = false;
    for (std::uint32_t b = 0; b < branching_bound && !has_child; ++b) {
      Seq child = s;
      child.push_back(b);
      has_child = member(child);
    }
    if (!has_child) out.push_back(s);
  }
  return out;
}

bool TreeSpec::has_path_through(std::uint32_t depth) const {
  for (const auto& s : members)
    if (s.size() >= depth) return true;
  return false;
}

TreeSpec make_tree(std::vector<Seq> members, std::uint32_t depth_bound,
                   std::uint32_t branching_bound) {
  if (depth_bound == 0) throw std::invalid_argument("make_tree: depth bound must be positive");
  if (branching_bound == 0)
    throw std::invalid_argument("make_tree: branching bound must be positive");
  members.push_back(Seq{});  // the root is always present
  std::sort(members.begin(), members.end(), shortlex_less);
  members.erase(std::unique(members.begin(), members.end()), members.end());
  for (const auto& s : members) {
    if (s.size() > depth_bound)
      throw std::invalid_argument("make_tree: member " + seq_str(s) +
                                  " exceeds the depth bound");
    for (auto v : s)
      if (v >= branching_bound)
        throw std::invalid_argument("make_tree: member " + seq_str(s) +
                                    " exceeds the branching bound");
  }
  TreeSpec t{std::move(members), depth_bound, branching_bound};
  for (const auto& s : t.members) {
    if (s.empty()) continue;
    Seq parent(s.begin(), s.end() - 1);
    if (!t.member(parent))
      throw std::invalid_argument("make_tree: not prefix-closed at " + seq_str(s));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Tree-to-potential gadget.

std::vector<std::uint32_t> wkl_blocked_set(const TreeSpec& tree, const Seq& sigma) {
  std::vector<std::uint32_t> blocked;
  if (sigma.size() < 2) return blocked;
  for (std::uint32_t i = 0; i + 1 < sigma.size(); ++i) {
    // flip string: sigma(0..i) followed by the complement of sigma(i+1)
    Seq flip(sigma.begin(), sigma.begin() + i + 1);
    flip.push_back(1u - sigma[i + 1]);
    bool survives = false;
    for (const auto& tau : tree.members) {
      if (tau.size() == sigma.size() + 1 && is_prefix(flip, tau)) {
        survives = true;
        break;
      }
    }
    if (!survives) blocked.push_back(i);
  }
  return blocked;
}

namespace {

Seq double_string(const Seq& sigma) {
  Seq out(2 * sigma.size(), 0u);
  for (std::size_t i = 0; i < sigma.size(); ++i) out[2 * i + 1] = sigma[i];
  return out;
}

Rat dyadic_left(const Seq& s) {
  Rat x(0);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i]) x += pow2(-static_cast<long>(i) - 1);
  return x;
}

Rat leaf_value(const std::vector<std::uint32_t>& blocked) {
  Rat v(2);
  for (auto i : blocked) v -= pow2(-2 * static_cast<long>(i));
  return v;
}

/// Strings that have just left the doubled tree: extensions by one symbol
/// of proper prefixes of doubled members, themselves prefix of no doubled
/// member.
std::vector<Seq> escape_strings(const std::vector<Seq>& doubled_members) {
  std::set<Seq> prefixes;  // all prefixes of doubled members, full included
  for (const auto& d : doubled_members)
    for (std::size_t n = 0; n <= d.size(); ++n) prefixes.insert(Seq(d.begin(), d.begin() + n));
  std::set<Seq> out;
  for (const auto& d : doubled_members) {
    for (std::size_t n = 0; n < d.size(); ++n) {
      for (std::uint32_t b = 0; b < 2; ++b) {
        Seq tau(d.begin(), d.begin() + n);
        tau.push_back(b);
        if (!prefixes.count(tau)) out.insert(tau);
      }
    }
  }
  std::vector<Seq> escapes(out.begin(), out.end());
  std::sort(escapes.begin(), escapes.end(), shortlex_less);
  return escapes;
}

/// Locally constant code on the sequence space: exact value per cylinder
/// of the covering piece family.
class WklCantorCont final : public ContBackend {
 public:
  WklCantorCont(std::vector<std::pair<Seq, Rat>> pieces)
      : space_(Space::cantor()), pieces_(std::move(pieces)) {
    for (const auto& p : pieces_) max_len_ = std::max(max_len_, p.first.size());
  }

  const Space& space() const override { return space_; }

  Bracket enclosure(const Ball& ball) const override {
    if (!ball.center.is_seq())
      throw std::invalid_argument("wkl enclosure: sequence point expected");
    const Seq& c = ball.center.seq();
    // The closed ball of radius r is the cylinder of the shortest center
    // prefix below resolution r; cap at the piece depth, where values on
    // the cylinder are already pinned.
    std::size_t len = 0;
    while (len <= max_len_ && pow2(-static_cast<long>(len)) > ball.radius) ++len;
    if (len > max_len_ + 1) len = max_len_ + 1;
    std::optional<Rat> lo, hi;
    for (const auto& p : pieces_) {
      bool meets = true;
      for (std::size_t i = 0; i < std::max<std::size_t>(p.first.size(), len) && meets; ++i) {
        if (i >= len) break;
        if (i >= p.first.size()) break;
        meets = at_padded(c, i) == p.first[i];
      }
      if (!meets) continue;
      lo = lo ? rat_min(*lo, p.second) : p.second;
      hi = hi ? rat_max(*hi, p.second) : p.second;
    }
    if (!lo) throw std::logic_error("wkl enclosure: pieces fail to cover the cylinder");
    return Bracket(*lo, ExtRat(*hi));
  }

  Modulus modulus() const override {
    // Pieces pin the value after max_len_ symbols, so the function is
    // locally constant at that scale.
    return Modulus{static_cast<long>(max_len_)};
  }

  std::optional<Rat> value_exact(const Point& x) const override {
    if (!x.is_seq()) return std::nullopt;
    for (const auto& p : pieces_) {
      bool inside = true;
      for (std::size_t i = 0; i < p.first.size() && inside; ++i)
        inside = at_padded(x.seq(), i) == p.first[i];
      if (inside) return p.second;
    }
    return std::nullopt;
  }

  std::string name() const override { return "wkl-cantor"; }

 private:
  Space space_;
  std::vector<std::pair<Seq, Rat>> pieces_;
  std::size_t max_len_ = 0;
};

struct UnitPiece {
  Rat left, right;
  bool leaf = false;
  Rat value;  // dip value for leaf pieces
};

}  // namespace

WklGadget wkl_gadget(const TreeSpec& tree, WklTarget target) {
  if (tree.branching_bound != 2)
    throw std::invalid_argument("wkl_gadget: binary tree required");
  if (tree.has_path_through(tree.depth_bound))
    throw std::invalid_argument(
        "wkl_gadget: tree reaches through its depth bound (no-path hypothesis violated)");

  std::vector<WklLeaf> leaves;
  for (const auto& sigma : tree.leaf_strings()) {
    WklLeaf leaf;
    leaf.sigma = sigma;
    leaf.doubled = double_string(sigma);
    leaf.a_set = wkl_blocked_set(tree, sigma);
    leaf.value = leaf_value(leaf.a_set);
    leaf.left = dyadic_left(leaf.doubled);
    leaf.right = leaf.left + pow2(-static_cast<long>(leaf.doubled.size()));
    leaves.push_back(std::move(leaf));
  }

  std::vector<Seq> doubled;
  for (const auto& s : tree.members) doubled.push_back(double_string(s));
  std::vector<Seq> escapes = escape_strings(doubled);

  // The leaf cylinders and escape cylinders tile the whole space.
  Rat total(0);
  for (const auto& l : leaves) total += pow2(-static_cast<long>(l.doubled.size()));
  for (const auto& t : escapes) total += pow2(-static_cast<long>(t.size()));
  if (total != 1) throw std::logic_error("wkl_gadget: piece cylinders do not tile the space");

  Rat min_value = leaves.front().value;
  for (const auto& l : leaves) min_value = rat_min(min_value, l.value);

  json serial;
  serial["version"] = 1;
  serial["op"] = "wkl";
  serial["target"] = target == WklTarget::Cantor ? "cantor" : "unit";
  serial["tree"] = jsonu::tree_to_json(tree);

  if (target == WklTarget::Cantor) {
    std::vector<std::pair<Seq, Rat>> pieces;
    for (const auto& l : leaves) pieces.emplace_back(l.doubled, l.value);
    for (const auto& t : escapes) pieces.emplace_back(t, Rat(3));
    ContCode code(std::make_shared<WklCantorCont>(std::move(pieces)), serial.dump());
    return WklGadget{tree,    target,           Space::cantor(), std::move(leaves),
                     escapes, std::move(min_value), std::move(code)};
  }

  // Unit-interval target: tents dipping at leaf-interval midpoints, 3 at
  // every piece boundary and across the escape intervals.
  std::vector<UnitPiece> pieces;
  for (const auto& l : leaves) pieces.push_back(UnitPiece{l.left, l.right, true, l.value});
  for (const auto& t : escapes) {
    Rat left = dyadic_left(t);
    pieces.push_back(UnitPiece{left, left + pow2(-static_cast<long>(t.size())), false, Rat(3)});
  }
  std::sort(pieces.begin(), pieces.end(),
            [](const UnitPiece& a, const UnitPiece& b) { return a.left < b.left; });
  std::vector<std::pair<Rat, Rat>> knots;
  auto add_knot = [&knots](const Rat& x, const Rat& y) {
    if (!knots.empty() && knots.back().first == x) {
      if (knots.back().second != y)
        throw std::logic_error("wkl_gadget: piece values disagree at a shared endpoint");
      return;
    }
    knots.emplace_back(x, y);
  };
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if ((i == 0 && pieces[i].left != 0) || (i > 0 && pieces[i].left != pieces[i - 1].right))
      throw std::logic_error("wkl_gadget: piece intervals do not tile [0,1]");
    add_knot(pieces[i].left, Rat(3));
    if (pieces[i].leaf) add_knot((pieces[i].left + pieces[i].right) / 2, pieces[i].value);
    add_knot(pieces[i].right, Rat(3));
  }
  if (pieces.back().right != 1)
    throw std::logic_error("wkl_gadget: piece intervals do not reach 1");
  ContCode pl = pl_cont(Space::unit_interval(), std::move(knots));
  ContCode code(pl.backend_ptr(), serial.dump());
  return WklGadget{tree,    target,           Space::unit_interval(), std::move(leaves),
                   escapes, std::move(min_value), std::move(code)};
}

namespace {

/// Exact value of the gadget potential.
Rat wkl_value(const WklGadget& g, const Point& x) {
  if (g.target == WklTarget::Cantor) {
    const Seq& s = x.seq();
    for (const auto& l : g.leaves) {
      bool inside = true;
      for (std::size_t i = 0; i < l.doubled.size() && inside; ++i)
        inside = at_padded(s, i) == l.doubled[i];
      if (inside) return l.value;
    }
    return Rat(3);  // escape region (tiling: everything else)
  }
  const Rat& t = x.rat();
  for (const auto& l : g.leaves) {
    if (t < l.left || t > l.right) continue;
    Rat mid = (l.left + l.right) / 2;
    Rat half = mid - l.left;
    if (t <= mid) return Rat(3) - (Rat(3) - l.value) * (t - l.left) / half;
    return Rat(3) - (Rat(3) - l.value) * (l.right - t) / half;
  }
  return Rat(3);
}

Point wkl_leaf_dip(const WklGadget& g, const WklLeaf& leaf) {
  if (g.target == WklTarget::Cantor) return Point(leaf.doubled);
  return Point((leaf.left + leaf.right) / 2);
}

}  // namespace

Point wkl_witness(const WklGadget& g, const Point& x) {
  if (!g.space.contains(x))
    throw UnsupportedPointError("wkl_witness: point not in " + g.space.describe());
  Rat fx = wkl_value(g, x);

  // Locate the leaf whose region contains x, if any (leaf regions are
  // preferred at shared unit-interval endpoints; the value there is 3
  // either way).
  const WklLeaf* own = nullptr;
  if (g.target == WklTarget::Cantor) {
    const Seq& s = x.seq();
    for (const auto& l : g.leaves) {
      bool inside = true;
      for (std::size_t i = 0; i < l.doubled.size() && inside; ++i)
        inside = at_padded(s, i) == l.doubled[i];
      if (inside) {
        own = &l;
        break;
      }
    }
  } else {
    for (const auto& l : g.leaves)
      if (x.rat() >= l.left && x.rat() <= l.right) {
        own = &l;
        break;
      }
  }

  auto passes = [&](const Point& y, const Rat& fy) {
    return fx - fy >= dist(g.space, x, y);
  };

  if (own == nullptr) {
    // Escape region: descend to the least dip; the drop is at least 1.
    for (const auto& l : g.leaves) {
      if (l.value != g.min_value) continue;
      Point y = wkl_leaf_dip(g, l);
      if (passes(y, l.value)) return y;
      break;  // 3 - min >= 1 >= d always holds; keep the check explicit
    }
    throw std::logic_error("wkl_witness: escape descent failed");
  }

  // Leaf case: follow the flipped continuation at the largest unblocked
  // index when there is one.
  const Seq& sigma = own->sigma;
  if (sigma.size() >= 2) {
    std::vector<bool> blocked(sigma.size() - 1, false);
    for (auto i : own->a_set) blocked[i] = true;
    for (std::size_t ip = sigma.size() - 1; ip-- > 0;) {
      if (blocked[ip]) continue;
      Seq flip(sigma.begin(), sigma.begin() + ip + 1);
      flip.push_back(1u - sigma[ip + 1]);
      for (const auto& l : g.leaves) {
        if (l.sigma.size() <= sigma.size() || !is_prefix(flip, l.sigma)) continue;
        Point y = wkl_leaf_dip(g, l);
        if (passes(y, l.value)) return y;
      }
      break;  // only the largest unblocked index carries the proof
    }
  }

  // Fallback: scan every dip for an exact pass (covers points high on
  // their own tent and leaves with no unblocked index).
  for (const auto& l : g.leaves) {
    Point y = wkl_leaf_dip(g, l);
    if (passes(y, l.value)) return y;
  }
  // A point at an exact minimum has no strict descent at this depth.
  if (fx == g.min_value) return x;
  throw UnsupportedPointError("wkl_witness: no exact descent at this depth");
}

// ---------------------------------------------------------------------------
// Injection-range gadget.

namespace {

class AcaInjectionCont final : public ContBackend {
 public:
  AcaInjectionCont(std::vector<std::pair<std::uint32_t, std::uint32_t>> table,
                   std::uint32_t levels)
      : space_(Space::baire()), table_(std::move(table)), levels_(levels) {
    masks_.assign(levels_ + 1, 0u);
    for (std::uint32_t n = 0; n <= levels_; ++n)
      for (const auto& [a, ha] : table_)
        if (ha < n) masks_[n] |= (1u << a);
  }

  const Space& space() const override { return space_; }

  /// Count of table entries a in the coded set with h(a) < n.
  static std::uint32_t popcount(std::uint32_t v) {
    std::uint32_t c = 0;
    while (v) {
      c += v & 1u;
      v >>= 1;
    }
    return c;
  }

  Rat term(std::uint32_t n, std::uint32_t coded) const {
    std::uint32_t v = popcount(coded & masks_[n]);
    return pow2(-2 * static_cast<long>(n) - 1 + static_cast<long>(v));
  }

  Bracket enclosure(const Ball& ball) const override {
    if (!ball.center.is_seq())
      throw std::invalid_argument("injection enclosure: sequence point expected");
    Rat g_lo(0), g_hi(0);
    for (std::uint32_t n = 0; n < levels_; ++n) {
      long slot = 1L << (n + 1);
      if (pow2(-slot) > ball.radius) {
        Rat t = term(n, ball.center.seq_at(static_cast<std::size_t>(slot)));
        g_lo += t;
        g_hi += t;
      } else {
        g_lo += pow2(-2 * static_cast<long>(n) - 1);
        g_hi += pow2(-2 * static_cast<long>(n) - 1 +
                     static_cast<long>(popcount(masks_[n])));
      }
    }
    return Bracket(Rat(1) - g_hi, ExtRat(Rat(1) - g_lo));
  }

  Modulus modulus() const override {
    // Only coordinates 2, 4, .., 2^levels matter, so the function is
    // locally constant at scale 2^-2^levels.
    return Modulus{1L << levels_};
  }

  std::optional<Rat> value_exact(const Point& x) const override {
    if (!x.is_seq()) return std::nullopt;
    Rat g(0);
    for (std::uint32_t n = 0; n < levels_; ++n)
      g += term(n, x.seq_at(static_cast<std::size_t>(1) << (n + 1)));
    return Rat(1) - g;
  }

  const Region* enum_region() const override { return &region_; }
  int enum_levels() const override { return 1; }

  std::string name() const override { return "aca-injection"; }

  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& table() const { return table_; }
  std::uint32_t levels() const { return levels_; }
  std::uint32_t mask(std::uint32_t n) const { return masks_[n]; }

 private:
  Space space_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> table_;
  std::uint32_t levels_;
  std::vector<std::uint32_t> masks_;  // bits of {a : h(a) < n}, n = 0..levels
  Region region_{std::nullopt, BaireBounds{2, 2}, std::nullopt};
};

}  // namespace

AcaInjectionGadget aca_injection_gadget(
    std::vector<std::pair<std::uint32_t, std::uint32_t>> table, std::uint32_t levels) {
  if (levels == 0 || levels > 16)
    throw std::invalid_argument("aca_injection_gadget: levels must be in 1..16");
  std::set<std::uint32_t> dom, ran;
  for (const auto& [a, ha] : table) {
    if (a >= 32)
      throw std::invalid_argument("aca_injection_gadget: domain entries must be below 32 "
                                  "(bitmask set coding)");
    if (!dom.insert(a).second)
      throw std::invalid_argument("aca_injection_gadget: duplicate domain entry");
    if (!ran.insert(ha).second)
      throw std::invalid_argument("aca_injection_gadget: table is not injective");
  }
  json serial;
  serial["version"] = 1;
  serial["op"] = "aca-injection";
  json rows = json::array();
  for (const auto& [a, ha] : table) rows.push_back(json::array({a, ha}));
  serial["table"] = rows;
  serial["levels"] = levels;
  auto backend = std::make_shared<AcaInjectionCont>(std::move(table), levels);
  auto tbl = backend->table();
  ContCode code(backend, serial.dump());
  return AcaInjectionGadget{std::move(tbl), levels, Space::baire(), std::move(code)};
}

namespace {

std::uint32_t injection_mask(const AcaInjectionGadget& g, std::uint32_t n) {
  std::uint32_t m = 0;
  for (const auto& [a, ha] : g.table)
    if (ha < n) m |= (1u << a);
  return m;
}

}  // namespace

Point aca_oracle_point(const AcaInjectionGadget& g) {
  Seq s((static_cast<std::size_t>(1) << (g.levels + 1)) + 1, 0u);
  for (std::uint32_t n = 0; n <= g.levels; ++n)
    s[static_cast<std::size_t>(1) << (n + 1)] = injection_mask(g, n);
  return Point(std::move(s));
}

std::vector<std::uint32_t> aca_decode_range(const AcaInjectionGadget& g, const Point& x_star) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t n = 0; n < g.levels; ++n) {
    std::uint32_t coded = x_star.seq_at(static_cast<std::size_t>(1) << (n + 2));
    for (const auto& [a, ha] : g.table) {
      if (ha == n && ((coded >> a) & 1u)) {
        out.push_back(n);
        break;
      }
    }
  }
  return out;
}

std::vector<Point> aca_perturbation_net(const AcaInjectionGadget& g, const Point& x) {
  std::vector<std::uint32_t> bits;
  for (const auto& [a, ha] : g.table) bits.push_back(a);
  std::sort(bits.begin(), bits.end());
  std::vector<Point> net;
  net.push_back(x);
  Seq base = x.seq();
  base.resize(std::max<std::size_t>(base.size(),
                                    (static_cast<std::size_t>(1) << g.levels) + 1),
              0u);
  for (std::uint32_t n = 0; n < g.levels; ++n) {
    std::size_t slot = static_cast<std::size_t>(1) << (n + 1);
    for (std::uint32_t sub = 0; sub < (1u << bits.size()); ++sub) {
      std::uint32_t mask = 0;
      for (std::size_t j = 0; j < bits.size(); ++j)
        if ((sub >> j) & 1u) mask |= (1u << bits[j]);
      if (mask == base[slot]) continue;
      Seq s = base;
      s[slot] = mask;
      net.push_back(Point(std::move(s)));
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Supremum gadget.

namespace {

class AcaSupLsc final : public LscBackend {
 public:
  explicit AcaSupLsc(std::vector<Rat> c)
      : space_(Space::unit_interval()), c_(std::move(c)), top_(c_.back()) {}

  const Space& space() const override { return space_; }

  Rat value(const Rat& x) const { return x < top_ ? Rat(2) : x; }

  struct Inf {
    Rat inf;
    Rat witness;
  };

  /// Exact infimum over the interval trace {x in [0,1] : between lo and
  /// hi, endpoint inclusion as flagged}.  The three certified rules meet
  /// the attained value: the left endpoint (identity part), the largest
  /// stream element (balls straddling the top), and the constant 2
  /// (balls entirely below the top).
  Inf exact_inf(const Rat& lo, const Rat& hi, bool hi_incl) const {
    if (lo >= top_) return Inf{lo, lo};
    if (hi > top_ || (hi == top_ && hi_incl)) return Inf{top_, top_};
    return Inf{Rat(2), lo};
  }

  ExtRat ball_bound(const Ball& ball) const override {
    const Rat& q = ball.center.rat();
    Rat u = q - ball.radius, v = q + ball.radius;
    if (v <= 0 || u >= 1 || ball.radius <= 0) return ExtRat::inf();  // empty trace
    return ExtRat(exact_inf(rat_max(u, Rat(0)), rat_min(v, Rat(1)), v > 1).inf);
  }

  ExtRat upper_evidence(const Point& x) const override {
    if (!space_.contains(x))
      throw std::invalid_argument("upper_evidence: point not in " + space_.describe());
    return ExtRat(value(x.rat()));
  }

  std::optional<ExtRat> value_exact(const Point& x) const override {
    if (!x.is_rat()) return std::nullopt;
    return ExtRat(value(x.rat()));
  }

  Rat lower_bound() const override { return Rat(0); }

  bool honest() const override { return true; }

  std::optional<Bracket> ball_inf(const Ball& ball, bool closed) const override {
    auto i = query(ball, closed);
    if (!i) return Bracket(Rat(2), ExtRat::inf());  // empty trace
    return Bracket(i->inf, ExtRat(i->inf));
  }

  std::optional<Point> ball_inf_witness(const Ball& ball, bool closed) const override {
    auto i = query(ball, closed);
    if (!i) return std::nullopt;
    return Point(i->witness);
  }

  std::string name() const override { return "aca-sup"; }

  const std::vector<Rat>& stream() const { return c_; }

 private:
  std::optional<Inf> query(const Ball& ball, bool closed) const {
    const Rat& q = ball.center.rat();
    Rat u = q - ball.radius, v = q + ball.radius;
    if (closed) {
      // Closed trace [max(u,0), min(v,1)]; nonempty whenever the center
      // lies in the space.
      return exact_inf(rat_max(u, Rat(0)), rat_min(v, Rat(1)), true);
    }
    if (v <= 0 || u >= 1 || ball.radius <= 0) return std::nullopt;
    return exact_inf(rat_max(u, Rat(0)), rat_min(v, Rat(1)), v > 1);
  }

  Space space_;
  std::vector<Rat> c_;
  Rat top_;
};

}  // namespace

AcaSupGadget aca_sup_gadget(std::vector<Rat> c) {
  if (c.empty()) throw std::invalid_argument("aca_sup_gadget: empty stream prefix");
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] < 0 || c[i] > 1)
      throw std::invalid_argument("aca_sup_gadget: stream values must lie in [0,1]");
    if (i > 0 && !(c[i - 1] < c[i]))
      throw std::invalid_argument("aca_sup_gadget: stream must increase strictly");
  }
  json serial;
  serial["version"] = 1;
  serial["op"] = "aca-sup";
  json arr = json::array();
  for (const auto& x : c) arr.push_back(jsonu::rat_to_json(x));
  serial["c"] = arr;
  auto backend = std::make_shared<AcaSupLsc>(std::move(c));
  auto stream = backend->stream();
  LscCode code(backend, serial.dump());
  return AcaSupGadget{std::move(stream), Space::unit_interval(), std::move(code)};
}

// ---------------------------------------------------------------------------
// Tree-family gadget.

std::uint64_t pair_index(std::uint32_t i, std::uint32_t n) {
  std::uint64_t s = static_cast<std::uint64_t>(i) + n;
  return s * (s + 1) / 2 + n;
}

namespace {

class Pi11Lsc final : public LscBackend {
 public:
  explicit Pi11Lsc(std::vector<TreeSpec> trees)
      : space_(Space::baire()), trees_(std::move(trees)) {
    for (std::size_t i = 0; i < trees_.size(); ++i) {
      std::uint64_t top = pair_index(static_cast<std::uint32_t>(i),
                                     trees_[i].depth_bound - 1);
      relevant_ = std::max<std::uint64_t>(relevant_, top + 1);
    }
  }

  const Space& space() const override { return space_; }

  /// Slice i of the length-limit prefix of s (zero padding applies below
  /// the limit only; entries at or beyond the limit are cut off).
  Seq slice(const Seq& s, std::size_t i, std::uint64_t limit) const {
    Seq out;
    for (std::uint32_t n = 0; n < trees_[i].depth_bound; ++n) {
      std::uint64_t idx = pair_index(static_cast<std::uint32_t>(i), n);
      if (idx >= limit) break;
      out.push_back(at_padded(s, static_cast<std::size_t>(idx)));
    }
    return out;
  }

  /// Sum of 2^-i over slices that cannot thread tree i within the limit.
  Rat contribution(const Seq& s, std::uint64_t limit) const {
    Rat total(0);
    for (std::size_t i = 0; i < trees_.size(); ++i)
      if (!trees_[i].member(slice(s, i, limit))) total += pow2(-static_cast<long>(i));
    return total;
  }

  ExtRat ball_bound(const Ball& ball) const override {
    if (!ball.center.is_seq())
      throw std::invalid_argument("ball_bound: sequence point expected");
    if (ball.radius <= 0) return ExtRat::inf();  // empty open ball
    const Seq& c = ball.center.seq();
    // Largest prefix length L with 2^-L still above the radius, capped
    // just past the indices the slices read.
    std::uint64_t cap = relevant_ + 64;
    std::uint64_t hi = 0;
    while (hi < cap && pow2(-static_cast<long>(hi) - 1) > ball.radius) ++hi;
    // The ball certifies the prefix c(0..L-1) when the zero-padded
    // prefix point formally contains it: d(pad, c) + r < 2^-L.
    for (std::uint64_t L = hi + 1; L-- > 0;) {
      Rat d(0);
      for (std::size_t e = static_cast<std::size_t>(L); e < c.size(); ++e) {
        if (c[e] != 0) {
          d = pow2(-static_cast<long>(e));
          break;
        }
      }
      if (d + ball.radius < pow2(-static_cast<long>(L)))
        return ExtRat(contribution(c, L));
    }
    return ExtRat(Rat(0));
  }

  ExtRat upper_evidence(const Point& x) const override {
    if (!x.is_seq())
      throw std::invalid_argument("upper_evidence: sequence point expected");
    return ExtRat(contribution(x.seq(), ~0ull));
  }

  std::optional<ExtRat> value_exact(const Point& x) const override {
    if (!x.is_seq()) return std::nullopt;
    return ExtRat(contribution(x.seq(), ~0ull));
  }

  Rat lower_bound() const override { return Rat(0); }

  const Region* enum_region() const override { return &region_; }
  int enum_levels() const override { return 1; }

  std::string name() const override { return "pi11"; }

  const std::vector<TreeSpec>& trees() const { return trees_; }

 private:
  Space space_;
  std::vector<TreeSpec> trees_;
  std::uint64_t relevant_ = 0;
  Region region_{std::nullopt, BaireBounds{2, 2}, std::nullopt};
};

/// Shortlex-least member of full depth, when the tree has one.
std::optional<Seq> full_depth_member(const TreeSpec& t) {
  for (const auto& s : t.members)
    if (s.size() == t.depth_bound) return s;
  return std::nullopt;
}

}  // namespace

Pi11Gadget pi11_gadget(std::vector<TreeSpec> trees) {
  if (trees.empty() || trees.size() > 16)
    throw std::invalid_argument("pi11_gadget: between 1 and 16 trees expected");
  json serial;
  serial["version"] = 1;
  serial["op"] = "pi11";
  json arr = json::array();
  for (const auto& t : trees) arr.push_back(jsonu::tree_to_json(t));
  serial["trees"] = arr;
  auto backend = std::make_shared<Pi11Lsc>(std::move(trees));
  auto ts = backend->trees();
  LscCode code(backend, serial.dump());
  return Pi11Gadget{std::move(ts), Space::baire(), std::move(code)};
}

Point pi11_oracle_point(const Pi11Gadget& g) {
  Seq s;
  for (std::size_t i = 0; i < g.trees.size(); ++i) {
    auto path = full_depth_member(g.trees[i]);
    if (!path) continue;
    for (std::uint32_t n = 0; n < path->size(); ++n) {
      std::size_t idx =
          static_cast<std::size_t>(pair_index(static_cast<std::uint32_t>(i), n));
      if (s.size() <= idx) s.resize(idx + 1, 0u);
      s[idx] = (*path)[n];
    }
  }
  return Point(std::move(s));
}

std::vector<std::uint32_t> pi11_decode(const Pi11Gadget& g, const Point& x_star) {
  std::vector<std::uint32_t> out;
  const Seq& s = x_star.seq();
  for (std::size_t i = 0; i < g.trees.size(); ++i) {
    Seq sl;
    for (std::uint32_t n = 0; n < g.trees[i].depth_bound; ++n)
      sl.push_back(at_padded(
          s, static_cast<std::size_t>(pair_index(static_cast<std::uint32_t>(i), n))));
    if (g.trees[i].member(sl)) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

std::vector<Point> pi11_challenger_net(const Pi11Gadget& g, const Point& x) {
  std::vector<Point> net;
  net.push_back(x);
  for (std::size_t i = 0; i < g.trees.size(); ++i) {
    auto path = full_depth_member(g.trees[i]);
    if (!path) continue;
    Seq s = x.seq();
    for (std::uint32_t n = 0; n < path->size(); ++n) {
      std::size_t idx =
          static_cast<std::size_t>(pair_index(static_cast<std::uint32_t>(i), n));
      if (s.size() <= idx) s.resize(idx + 1, 0u);
      s[idx] = (*path)[n];
    }
    Point y(std::move(s));
    if (!point_eq(g.space, x, y)) net.push_back(std::move(y));
  }
  return net;
}

// ---------------------------------------------------------------------------
// Pseudofibration and embeddings.

Point pseudofib_iota(const Point& fx, const Rat& y, const Rat& a, const Rat& b) {
  if (!(a < b)) throw std::invalid_argument("pseudofib_iota: range must satisfy a < b");
  if (y < a || y > b)
    throw std::invalid_argument("pseudofib_iota: y outside the carried range");
  if (!fx.is_pl()) throw std::invalid_argument("pseudofib_iota: curve point expected");
  std::vector<std::pair<Rat, Rat>> knots;
  knots.emplace_back(Rat(0), y);
  for (const auto& kn : fx.pl().knots) knots.emplace_back((kn.first + 1) / 2, kn.second);
  return Point(PLFunc(std::move(knots)));
}

Rat pseudofib_pi(const Point& g, const Rat& a, const Rat& b) {
  if (!(a < b)) throw std::invalid_argument("pseudofib_pi: range must satisfy a < b");
  if (!g.is_pl()) throw std::invalid_argument("pseudofib_pi: curve point expected");
  Rat v = g.pl().eval(Rat(0));
  return rat_min(rat_max(v, a), b);
}

Point embed_unit(const Rat& r) {
  if (r < 0 || r > 1) throw std::invalid_argument("embed_unit: value outside [0,1]");
  return Point(PLFunc::constant(r));
}

std::pair<Rat, Rat> embed_baire_interval(std::uint32_t n, std::uint32_t m) {
  Rat base = Rat(1) - pow2(-static_cast<long>(n) - 1);
  return {base - pow2(-static_cast<long>(n + m) - 1), base - pow2(-static_cast<long>(n + m) - 2)};
}

Point embed_baire(const Point& x, std::uint32_t depth) {
  if (!x.is_seq()) throw std::invalid_argument("embed_baire: sequence point expected");
  if (x.seq().size() > depth)
    throw std::invalid_argument("embed_baire: depth must cover the sequence length");
  std::vector<std::pair<Rat, Rat>> knots;
  for (std::uint32_t n = 0; n < depth; ++n) {
    std::uint32_t m = x.seq_at(n);
    if (m > (1u << 20))
      throw std::invalid_argument("embed_baire: entry too large for exact breakpoints");
    auto [lo, hi] = embed_baire_interval(n, m);
    if (knots.empty() && lo > 0) knots.emplace_back(Rat(0), Rat(0));
    knots.emplace_back(lo, Rat(0));
    knots.emplace_back((lo + hi) / 2, pow2(-static_cast<long>(n)));
    knots.emplace_back(hi, Rat(0));
  }
  if (knots.empty()) knots.emplace_back(Rat(0), Rat(0));
  knots.emplace_back(Rat(1), Rat(0));
  return Point(PLFunc(std::move(knots)));
}

std::optional<Seq> embed_baire_decode(const PLFunc& h, std::uint32_t depth,
                                      std::uint32_t entry_cap) {
  Seq out;
  for (std::uint32_t n = 0; n < depth; ++n) {
    std::optional<std::uint32_t> found;
    for (std::uint32_t m = 0; m <= entry_cap; ++m) {
      auto [lo, hi] = embed_baire_interval(n, m);
      if (h.sup_abs_on(lo, hi) == 0) continue;
      if (found) return std::nullopt;  // mass on two hats of one level
      found = m;
    }
    if (!found) return std::nullopt;
    out.push_back(*found);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lift of a localized search to curve space.

namespace {

/// Reparametrized right half of h: u -> h((u+1)/2), exact.
PLFunc right_half(const PLFunc& h) {
  std::vector<Rat> grid{Rat(0), Rat(1)};
  for (const auto& kn : h.knots)
    if (kn.first > Rat(1, 2) && kn.first < 1) grid.push_back(kn.first * 2 - 1);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<std::pair<Rat, Rat>> knots;
  for (const auto& u : grid) knots.emplace_back(u, h.eval((u + 1) / 2));
  return PLFunc(std::move(knots));
}

/// Exact distance from h to the fiber {iota(curve, y) : y in [floor, b]}:
/// the right halves compare outright, and the left-half distance is the
/// minimum over y of a finite max of absolute affine functions of y.
Rat fiber_dist(const PLFunc& h, const PLFunc& curve, const Rat& v0, const Rat& floor,
               const Rat& b) {
  Rat right = PLFunc::sup_diff(right_half(h), curve);

  std::vector<Rat> ts{Rat(0), Rat(1, 2)};
  for (const auto& kn : h.knots)
    if (kn.first > 0 && kn.first < Rat(1, 2)) ts.push_back(kn.first);
  std::sort(ts.begin(), ts.end());
  // |h(t) - ((1-2t) y + 2t v0)| at the breakpoints: |c_j - d_j y|.
  std::vector<std::pair<Rat, Rat>> cd;
  for (const auto& t : ts) cd.emplace_back(h.eval(t) - 2 * t * v0, Rat(1) - 2 * t);
  auto left_at = [&cd](const Rat& y) {
    Rat m(0);
    for (const auto& [c, d] : cd) m = rat_max(m, rat_abs(c - d * y));
    return m;
  };
  std::vector<Rat> ys{floor, b};
  for (std::size_t j = 0; j < cd.size(); ++j) {
    if (cd[j].second != 0) ys.push_back(cd[j].first / cd[j].second);
    for (std::size_t k = j + 1; k < cd.size(); ++k) {
      Rat dd = cd[j].second - cd[k].second;
      if (dd != 0) ys.push_back((cd[j].first - cd[k].first) / dd);
      Rat ds = cd[j].second + cd[k].second;
      if (ds != 0) ys.push_back((cd[j].first + cd[k].first) / ds);
    }
  }
  std::optional<Rat> best;
  for (const auto& y : ys) {
    Rat yc = rat_min(rat_max(y, floor), b);
    Rat v = left_at(yc);
    if (!best || v < *best) best = v;
  }
  return rat_max(right, *best);
}

class LvpLiftCont final : public ContBackend {
 public:
  LvpLiftCont(Rat a, Rat b, std::vector<PLFunc> embedded, std::vector<Rat> floors,
              Region region)
      : space_(Space::c01()),
        a_(std::move(a)),
        b_(std::move(b)),
        embedded_(std::move(embedded)),
        floors_(std::move(floors)),
        region_(std::move(region)) {}

  const Space& space() const override { return space_; }

  Rat at(const Point& x) const {
    std::string key = jsonu::point_to_json(x).dump();
    std::lock_guard<std::mutex> lock(mu_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const PLFunc& h = x.pl();
    Rat pi = rat_min(rat_max(h.eval(Rat(0)), a_), b_);
    std::optional<Rat> g;
    for (std::size_t i = 0; i < embedded_.size(); ++i) {
      Rat d = fiber_dist(h, embedded_[i], embedded_[i].eval(Rat(0)), floors_[i], b_);
      if (!g || d < *g) g = d;
    }
    Rat v = pi + rat_min(*g, Rat(1));
    memo_.emplace(std::move(key), v);
    return v;
  }

  Bracket enclosure(const Ball& ball) const override {
    // pi is 1-Lipschitz and the sampled-slice distance is 1-Lipschitz, so
    // the sum moves at most twice the radius off its center value.
    Rat v = at(ball.center);
    Rat pad = 2 * ball.radius;
    return Bracket(v - pad, ExtRat(v + pad));
  }

  Modulus modulus() const override { return lipschitz_modulus(Rat(2)); }

  std::optional<Rat> value_exact(const Point& x) const override {
    if (!x.is_pl()) return std::nullopt;
    return at(x);
  }

  const Region* enum_region() const override { return &region_; }
  int enum_levels() const override { return 1; }

  std::string name() const override { return "lvp-lift"; }

 private:
  Space space_;
  Rat a_, b_;
  std::vector<PLFunc> embedded_;
  std::vector<Rat> floors_;
  Region region_;
  mutable std::mutex mu_;
  mutable std::map<std::string, Rat> memo_;
};

}  // namespace

Point LvpLift::lift_point(const Point& x, const Rat& y) const {
  Point curve = kind == EmbedKind::Unit ? embed_unit(x.rat()) : embed_baire(x, depth);
  return pseudofib_iota(curve, y, a, b);
}

Rat LvpLift::project(const Point& z) const { return pseudofib_pi(z, a, b); }

LvpLift lvp_to_fvp_lift(const LscCode& f, EmbedKind kind, const Rat& a, const Rat& b,
                        int resolution, long budget, std::uint32_t baire_depth) {
  if (!(a < b)) throw std::invalid_argument("lvp_to_fvp_lift: range must satisfy a < b");
  if (resolution < 0) throw std::invalid_argument("lvp_to_fvp_lift: negative resolution");
  const Space& s = f.space();
  std::optional<Region> sample_region;
  if (kind == EmbedKind::Unit) {
    bool interval = s.kind() == Kind::UnitInterval ||
                    (s.kind() == Kind::ClosedInterval && s.lo() >= 0 && s.hi() <= 1);
    if (!interval)
      throw std::invalid_argument(
          "lvp_to_fvp_lift: the constant-curve embedding needs a potential on a "
          "sub-interval of [0,1]");
  } else {
    if (s.kind() != Kind::Baire)
      throw std::invalid_argument(
          "lvp_to_fvp_lift: the hat-sum embedding needs a potential on the sequence space");
    sample_region = Region{std::nullopt, BaireBounds{4, baire_depth}, std::nullopt};
  }

  std::vector<Point> samples = net(s, resolution, sample_region ? &*sample_region : nullptr);
  std::vector<Point> candidates;
  std::vector<PLFunc> embedded;
  std::vector<Rat> floors;
  for (const auto& x : samples) {
    ExtRat lo = f.value_lower(x, budget);
    if (!lo.finite()) continue;  // certified off the support
    Rat floor = rat_max(a, lo.get());
    if (floor > b) continue;  // fiber empty within the carried range
    candidates.push_back(x);
    embedded.push_back((kind == EmbedKind::Unit ? embed_unit(x.rat())
                                                : embed_baire(x, baire_depth))
                           .pl());
    floors.push_back(std::move(floor));
  }
  if (candidates.empty())
    throw EmptySupportError("lvp_to_fvp_lift: no sample has a certified finite lower "
                            "bound within the carried range");

  ExplicitNet lifted;
  lifted.covering_radius = Rat(1);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::vector<std::pair<Rat, Rat>> knots;
    knots.emplace_back(Rat(0), floors[i]);
    for (const auto& kn : embedded[i].knots) knots.emplace_back((kn.first + 1) / 2, kn.second);
    lifted.points.push_back(Point(PLFunc(std::move(knots))));
  }
  Region region{std::nullopt, std::nullopt, std::move(lifted)};

  Rat slack = net_covering_radius(s, resolution, sample_region ? &*sample_region : nullptr);
  auto backend = std::make_shared<LvpLiftCont>(a, b, embedded, floors, std::move(region));
  ContCode code(backend, "");
  return LvpLift{f,          kind,   a,     b, baire_depth, std::move(candidates),
                 std::move(embedded), std::move(floors), std::move(slack),
                 Space::c01(), std::move(code)};
}

}  // namespace evp
