#include <doctest.h>

#include <evp/codes.hpp>
#include <evp/gadgets.hpp>
#include <evp/search.hpp>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

using namespace evp;

namespace {

// --- fixture trees ----------------------------------------------------------

TreeSpec tiny_tree() {  // members: (), 0, 1, 01
  return make_tree({{}, {0}, {1}, {0, 1}}, 8, 2);
}

TreeSpec caterpillar_tree() {  // all-ones spine with left stubs, depth 6
  return make_tree({{},
                    {0},
                    {1},
                    {1, 0},
                    {1, 1},
                    {1, 1, 0},
                    {1, 1, 1},
                    {1, 1, 1, 0},
                    {1, 1, 1, 1},
                    {1, 1, 1, 1, 0},
                    {1, 1, 1, 1, 1},
                    {1, 1, 1, 1, 1, 0},
                    {1, 1, 1, 1, 1, 1}},
                   8, 2);
}

TreeSpec complete_tree(std::uint32_t depth) {  // all binary strings up to depth
  std::vector<Seq> members{{}};
  for (std::uint32_t len = 1; len <= depth; ++len) {
    for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
      Seq s(len);
      for (std::uint32_t j = 0; j < len; ++j) s[j] = (bits >> (len - 1 - j)) & 1u;
      members.push_back(std::move(s));
    }
  }
  return make_tree(std::move(members), 8, 2);
}

TreeSpec straggler_tree() {  // three length-5 limbs plus a short leaf at 11
  return make_tree({{},
                    {0},
                    {1},
                    {0, 0},
                    {0, 1},
                    {1, 0},
                    {1, 1},
                    {0, 0, 0},
                    {0, 1, 1},
                    {1, 0, 0},
                    {0, 0, 0, 0},
                    {0, 1, 1, 0},
                    {1, 0, 0, 0},
                    {0, 0, 0, 0, 1},
                    {0, 1, 1, 0, 1},
                    {1, 0, 0, 0, 1}},
                   8, 2);
}

TreeSpec root_tree() { return make_tree({{}}, 8, 2); }

// chain of `symbol` repeated 1..depth times (plus the root)
TreeSpec chain_tree(std::uint32_t symbol, std::uint32_t depth,
                    std::vector<Seq> extra = {}) {
  std::vector<Seq> members{{}};
  Seq s;
  for (std::uint32_t k = 0; k < depth; ++k) {
    s.push_back(symbol);
    members.push_back(s);
  }
  for (auto& e : extra) members.push_back(std::move(e));
  return make_tree(std::move(members), 8, 2);
}

// --- independent re-derivations used as oracles ------------------------------

bool ref_prefix(const Seq& p, const Seq& s) {
  if (p.size() > s.size()) return false;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] != s[i]) return false;
  return true;
}

std::vector<std::uint32_t> ref_blocked(const TreeSpec& t, const Seq& sigma) {
  std::vector<std::uint32_t> out;
  if (sigma.size() < 2) return out;
  for (std::uint32_t i = 0; i + 1 < sigma.size(); ++i) {
    Seq want(sigma.begin(), sigma.begin() + i + 1);
    want.push_back(1u - sigma[i + 1]);
    bool extended = false;
    for (const Seq& m : t.members)
      if (m.size() == sigma.size() + 1 && ref_prefix(want, m)) {
        extended = true;
        break;
      }
    if (!extended) out.push_back(i);
  }
  return out;
}

bool ref_dfs_path(const TreeSpec& t, Seq& s, std::uint32_t depth) {
  if (s.size() >= depth) return true;
  for (std::uint32_t b = 0; b < t.branching_bound; ++b) {
    s.push_back(b);
    if (t.member(s) && ref_dfs_path(t, s, depth)) return true;
    s.pop_back();
  }
  return false;
}

bool ref_has_path(const TreeSpec& t, std::uint32_t depth) {
  Seq s;
  return ref_dfs_path(t, s, depth);
}

std::vector<Seq> all_binary_strings(std::uint32_t max_len) {
  std::vector<Seq> out{{}};
  for (std::uint32_t len = 1; len <= max_len; ++len)
    for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
      Seq s(len);
      for (std::uint32_t j = 0; j < len; ++j) s[j] = (bits >> (len - 1 - j)) & 1u;
      out.push_back(std::move(s));
    }
  return out;
}

LscCode identity_lsc() {
  PiecewiseLscSpec spec;
  spec.cuts = {Rat(0), Rat(1)};
  spec.pieces.push_back({false, Rat(0), Rat(1)});
  spec.values = {ExtRat(Rat(0)), ExtRat(Rat(1))};
  return pl_lsc(Space::unit_interval(), std::move(spec));
}

Region explicit_region(std::vector<Point> points) {
  ExplicitNet en;
  en.points = std::move(points);
  en.covering_radius = Rat(1);
  return Region{std::nullopt, std::nullopt, std::move(en)};
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("finite trees: normalization, membership, leaves, paths") {
  TreeSpec t = make_tree({{0, 1}, {1}, {}, {0}, {0}}, 8, 2);  // unsorted + dup
  CHECK(t.members == std::vector<Seq>{{}, {0}, {1}, {0, 1}});

  CHECK(t.member(Seq{}));
  CHECK(t.member(Seq{0, 1}));
  CHECK_FALSE(t.member(Seq{1, 1}));
  CHECK_FALSE(t.member(Seq{0, 1, 0}));

  CHECK(t.leaf_strings() == std::vector<Seq>{{1}, {0, 1}});
  CHECK(t.has_path_through(0));
  CHECK(t.has_path_through(2));
  CHECK_FALSE(t.has_path_through(3));

  TreeSpec cat = caterpillar_tree();
  CHECK(cat.leaf_strings().size() == 7);
  CHECK(cat.has_path_through(6));
  CHECK_FALSE(cat.has_path_through(7));

  TreeSpec root = root_tree();
  CHECK(root.leaf_strings() == std::vector<Seq>{{}});
  CHECK(root.has_path_through(0));
  CHECK_FALSE(root.has_path_through(1));

  // has_path_through agrees with a direct depth-first scan on every fixture
  for (const TreeSpec& tree :
       {tiny_tree(), caterpillar_tree(), complete_tree(3), straggler_tree(), root_tree()})
    for (std::uint32_t d = 0; d <= 8; ++d)
      CHECK(tree.has_path_through(d) == ref_has_path(tree, d));

  CHECK(make_tree({{0}}, 8, 2).members.size() == 2);  // root is inserted
  CHECK_THROWS_AS(make_tree({{}, {0, 1}}, 8, 2), std::invalid_argument);   // gap
  CHECK_THROWS_AS(make_tree({{}, {2}}, 8, 2), std::invalid_argument);      // symbol
  CHECK_THROWS_AS(make_tree({{}, {0}, {0, 0}, {0, 0, 0}}, 2, 2),
                  std::invalid_argument);                                  // too deep
  CHECK_THROWS_AS(make_tree({{}}, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_tree({{}}, 8, 0), std::invalid_argument);
}

TEST_CASE("blocked index sets match a direct recomputation") {
  // frozen small cases first
  CHECK(wkl_blocked_set(tiny_tree(), {1}).empty());
  CHECK(wkl_blocked_set(tiny_tree(), {0, 1}) == std::vector<std::uint32_t>{0});
  CHECK(wkl_blocked_set(caterpillar_tree(), {1, 1, 1, 1, 1, 1}) ==
        std::vector<std::uint32_t>{0, 1, 2, 3, 4});

  for (const TreeSpec& tree : {tiny_tree(), caterpillar_tree(), straggler_tree()}) {
    for (const Seq& sigma : all_binary_strings(5)) {
      CAPTURE(sigma.size());
      CHECK(wkl_blocked_set(tree, sigma) == ref_blocked(tree, sigma));
    }
  }
}

TEST_CASE("tree gadget: frozen data for the tiny tree") {
  WklGadget g = wkl_gadget(tiny_tree(), WklTarget::Cantor);

  REQUIRE(g.leaves.size() == 2);
  CHECK(g.leaves[0].sigma == Seq{1});
  CHECK(g.leaves[0].a_set.empty());
  CHECK(g.leaves[0].value == Rat(2));
  CHECK(g.leaves[0].doubled == Seq{0, 1});
  CHECK(g.leaves[0].left == Rat(1, 4));
  CHECK(g.leaves[0].right == Rat(1, 2));

  CHECK(g.leaves[1].sigma == Seq{0, 1});
  CHECK(g.leaves[1].a_set == std::vector<std::uint32_t>{0});
  CHECK(g.leaves[1].value == Rat(1));
  CHECK(g.leaves[1].doubled == Seq{0, 0, 0, 1});
  CHECK(g.leaves[1].left == Rat(1, 16));
  CHECK(g.leaves[1].right == Rat(1, 8));

  CHECK(g.escapes == std::vector<Seq>{{1}, {0, 0, 1}, {0, 0, 0, 0}});
  CHECK(g.min_value == Rat(1));

  // leaf and escape cylinders tile the space: widths sum to one
  Rat total(0);
  for (const auto& l : g.leaves) total += pow2(-static_cast<long>(l.doubled.size()));
  for (const auto& e : g.escapes) total += pow2(-static_cast<long>(e.size()));
  CHECK(total == Rat(1));

  // caterpillar: both full-length leaves carry the global minimum
  WklGadget cat = wkl_gadget(caterpillar_tree(), WklTarget::Cantor);
  CHECK(cat.min_value == Rat(171, 256));
  for (const auto& l : cat.leaves)
    if (l.sigma.size() == 6) CHECK(l.value == Rat(171, 256));

  // degenerate root-only tree: one leaf of value 2 covering everything
  WklGadget root = wkl_gadget(root_tree(), WklTarget::Cantor);
  REQUIRE(root.leaves.size() == 1);
  CHECK(root.leaves[0].value == Rat(2));
  CHECK(root.leaves[0].left == Rat(0));
  CHECK(root.leaves[0].right == Rat(1));
  CHECK(root.escapes.empty());
  CHECK(root.min_value == Rat(2));
}

TEST_CASE("tree gadget: exact potential values on both targets") {
  WklGadget gc = wkl_gadget(tiny_tree(), WklTarget::Cantor);
  CHECK(gc.code.value_exact(Point(Seq{0, 1})) == Rat(2));           // leaf (1)
  CHECK(gc.code.value_exact(Point(Seq{0, 1, 1, 1, 0})) == Rat(2));  // same cylinder
  CHECK(gc.code.value_exact(Point(Seq{0, 0, 0, 1})) == Rat(1));     // leaf (01)
  CHECK(gc.code.value_exact(Point(Seq{1})) == Rat(3));              // escape (1)
  CHECK(gc.code.value_exact(Point(Seq{1, 0, 1})) == Rat(3));
  CHECK(gc.code.value_exact(Point(Seq{0, 0, 1})) == Rat(3));        // escape (001)
  CHECK(gc.code.value_exact(Point(Seq{0, 0, 0, 0})) == Rat(3));     // escape (0000)

  WklGadget gu = wkl_gadget(tiny_tree(), WklTarget::Unit);
  CHECK(gu.space.kind() == Kind::UnitInterval);
  CHECK(gu.code.value_exact(Point(Rat(0))) == Rat(3));
  CHECK(gu.code.value_exact(Point(Rat(1, 16))) == Rat(3));
  CHECK(gu.code.value_exact(Point(Rat(3, 32))) == Rat(1));   // dip of leaf (01)
  CHECK(gu.code.value_exact(Point(Rat(1, 8))) == Rat(3));
  CHECK(gu.code.value_exact(Point(Rat(1, 4))) == Rat(3));
  CHECK(gu.code.value_exact(Point(Rat(3, 8))) == Rat(2));    // dip of leaf (1)
  CHECK(gu.code.value_exact(Point(Rat(5, 16))) == Rat(5, 2));  // halfway down
  CHECK(gu.code.value_exact(Point(Rat(1, 2))) == Rat(3));
  CHECK(gu.code.value_exact(Point(Rat(1))) == Rat(3));

  WklGadget ru = wkl_gadget(root_tree(), WklTarget::Unit);
  CHECK(ru.code.value_exact(Point(Rat(0))) == Rat(3));
  CHECK(ru.code.value_exact(Point(Rat(1, 2))) == Rat(2));
  CHECK(ru.code.value_exact(Point(Rat(1, 4))) == Rat(5, 2));
}

TEST_CASE("tree gadget rejects ill-fitting trees") {
  TreeSpec through = make_tree({{}, {0}, {0, 0}}, 2, 2);
  CHECK_THROWS_AS(wkl_gadget(through, WklTarget::Cantor), std::invalid_argument);
  CHECK_THROWS_AS(wkl_gadget(through, WklTarget::Unit), std::invalid_argument);

  TreeSpec ternary = make_tree({{}, {2}}, 8, 3);
  CHECK_THROWS_AS(wkl_gadget(ternary, WklTarget::Cantor), std::invalid_argument);
}

TEST_CASE("tree gadget witness inequality is exact across fine nets") {
  for (const TreeSpec& tree :
       {tiny_tree(), caterpillar_tree(), complete_tree(3), straggler_tree(), root_tree()}) {
    for (WklTarget target : {WklTarget::Cantor, WklTarget::Unit}) {
      WklGadget g = wkl_gadget(tree, target);
      CAPTURE(g.leaves.size());
      std::size_t checked = 0;
      for (const Point& x : net(g.space, 10)) {
        Point w = wkl_witness(g, x);
        auto fx = g.code.value_exact(x);
        auto fw = g.code.value_exact(w);
        REQUIRE(fx.has_value());
        REQUIRE(fw.has_value());
        CHECK(*fx - *fw >= dist(g.space, x, w));
        ++checked;
      }
      CHECK(checked >= 1024);
    }
  }

  // escape points descend all the way to the minimum value
  WklGadget gc = wkl_gadget(tiny_tree(), WklTarget::Cantor);
  Point esc(Seq{1, 1, 0});
  Point w = wkl_witness(gc, esc);
  CHECK(gc.code.value_exact(w) == gc.min_value);
  CHECK(*gc.code.value_exact(esc) - *gc.code.value_exact(w) >= dist(gc.space, esc, w));

  WklGadget gu = wkl_gadget(tiny_tree(), WklTarget::Unit);
  Point uesc(Rat(3, 4));
  Point uw = wkl_witness(gu, uesc);
  CHECK(gu.code.value_exact(uw) == gu.min_value);

  // a point at an exact minimum is its own witness
  WklGadget full = wkl_gadget(complete_tree(3), WklTarget::Cantor);
  Point at_min(Seq{0, 0, 0, 0, 0, 0});
  CHECK(full.code.value_exact(at_min) == full.min_value);
  CHECK(point_eq(full.space, wkl_witness(full, at_min), at_min));

  CHECK_THROWS_AS(wkl_witness(gu, Point(Rat(2))), UnsupportedPointError);
}

// ---------------------------------------------------------------------------

TEST_CASE("injection gadget: oracle point, exact values, decode") {
  AcaInjectionGadget g = aca_injection_gadget({{0, 0}, {1, 1}, {2, 2}}, 3);
  CHECK(g.levels == 3);
  CHECK(g.table.size() == 3);

  Point oracle = aca_oracle_point(g);
  CHECK(oracle.seq().size() == 17);
  CHECK(oracle.seq_at(2) == 0);   // {a : h(a) < 0} empty
  CHECK(oracle.seq_at(4) == 1);   // {0}
  CHECK(oracle.seq_at(8) == 3);   // {0, 1}
  CHECK(oracle.seq_at(16) == 7);  // {0, 1, 2}
  CHECK(oracle.seq_at(3) == 0);
  CHECK(oracle.seq_at(5) == 0);

  CHECK(g.code.value_exact(oracle) == Rat(1, 8));
  CHECK(g.code.value_exact(Point(Seq{})) == Rat(11, 32));  // all-zero slots

  // flipping one influential slot moves f by an exact power-of-two gap
  Seq damaged = oracle.seq();
  damaged[4] = 0;  // level 1 loses its only valid element
  Point dp(damaged);
  CHECK(g.code.value_exact(dp) == Rat(1, 4));
  CHECK(*g.code.value_exact(dp) - *g.code.value_exact(oracle) ==
        pow2(-3 + 1) - pow2(-3 + 0));
  CHECK(dist(g.space, oracle, dp) == pow2(-4));

  CHECK(aca_decode_range(g, oracle) == std::vector<std::uint32_t>{0, 1, 2});
  Seq cut = oracle.seq();
  cut[16] = 0;
  CHECK(aca_decode_range(g, Point(cut)) == std::vector<std::uint32_t>{0, 1});

  // doubling table: range {0, 2, 4} read back below level 6
  AcaInjectionGadget g2 = aca_injection_gadget({{0, 0}, {1, 2}, {2, 4}}, 6);
  Point oracle2 = aca_oracle_point(g2);
  CHECK(aca_decode_range(g2, oracle2) == std::vector<std::uint32_t>{0, 2, 4});
  CHECK(oracle2.seq_at(4) == 1);    // {h < 1} = {0}
  CHECK(oracle2.seq_at(16) == 3);   // {h < 3} = {0, 1}
  CHECK(oracle2.seq_at(128) == 7);  // {h < 6} = {0, 1, 2}

  // perturbation net: the point itself plus every alternative mask per slot
  std::vector<Point> pert = aca_perturbation_net(g, oracle);
  CHECK(pert.size() == 1 + 3 * 7);
  CHECK(point_eq(g.space, pert[0], oracle));
}

TEST_CASE("injection gadget: criticality verdicts over the perturbation net") {
  AcaInjectionGadget g = aca_injection_gadget({{0, 0}, {1, 1}, {2, 2}}, 3);
  Point oracle = aca_oracle_point(g);

  SearchParams params;
  params.epsilon = Rat(1);
  params.resolution = 8;
  params.region = explicit_region(aca_perturbation_net(g, oracle));
  CriticalityCertificate good = is_critical(g.code, oracle, params);
  CHECK(good.pass);
  CHECK(recheck_certificate(good));
  CHECK(good.f_upper_x == Rat(1, 8));

  // away from the oracle a cheap slot rewrite refutes criticality
  Point zero(Seq{});
  SearchParams tight = params;
  tight.epsilon = pow2(-12);
  tight.region = explicit_region(aca_perturbation_net(g, zero));
  CriticalityCertificate bad = is_critical(g.code, zero, tight);
  CHECK_FALSE(bad.pass);
  CHECK(recheck_certificate(bad));
  REQUIRE(bad.witness.has_value());
  CHECK(bad.witness->f_lower_y < bad.f_upper_x);
  bool found = false;
  for (const auto& row : bad.rows)
    if (row.distance == Rat(1, 16) && row.f_lower == ExtRat(Rat(7, 32))) found = true;
  CHECK(found);
}

TEST_CASE("injection gadget validation") {
  CHECK_THROWS_AS(aca_injection_gadget({{0, 0}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(aca_injection_gadget({{0, 0}}, 17), std::invalid_argument);
  CHECK_THROWS_AS(aca_injection_gadget({{32, 0}}, 3), std::invalid_argument);
  CHECK_THROWS_AS(aca_injection_gadget({{0, 0}, {0, 1}}, 3), std::invalid_argument);
  CHECK_THROWS_AS(aca_injection_gadget({{0, 1}, {1, 1}}, 3), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST_CASE("supremum gadget: exact values and honest ball infima") {
  AcaSupGadget g = aca_sup_gadget({Rat(1, 4), Rat(3, 8), Rat(7, 16)});
  CHECK(g.c.size() == 3);
  CHECK(g.code.honest());
  CHECK(g.code.honest_slack() == Rat(0));

  CHECK(g.code.value_exact(Point(Rat(1, 4)))->get() == Rat(2));
  CHECK(g.code.value_exact(Point(Rat(0)))->get() == Rat(2));
  CHECK(g.code.value_exact(Point(Rat(7, 16)))->get() == Rat(7, 16));
  CHECK(g.code.value_exact(Point(Rat(3, 4)))->get() == Rat(3, 4));

  // entirely below the largest stream element: constant 2
  Bracket below = g.code.honest_ball_inf(Ball{Point(Rat(1, 8)), Rat(1, 8)}, true);
  CHECK(below.lo == Rat(2));
  CHECK(below.hi == ExtRat(Rat(2)));

  // entirely above: the identity part, infimum at the left endpoint
  Bracket above = g.code.honest_ball_inf(Ball{Point(Rat(3, 4)), Rat(1, 8)}, true);
  CHECK(above.lo == Rat(5, 8));
  CHECK(above.hi == ExtRat(Rat(5, 8)));

  // straddling: the infimum is the largest stream element itself
  Bracket straddle = g.code.honest_ball_inf(Ball{Point(Rat(1, 2)), Rat(1, 4)}, true);
  CHECK(straddle.lo == Rat(7, 16));
  CHECK(straddle.hi == ExtRat(Rat(7, 16)));

  // open/closed boundary case: the closed ball reaches the top, the open
  // ball stops just short of it and stays on the constant part
  Ball edge{Point(Rat(11, 32)), Rat(3, 32)};
  CHECK(g.code.honest_ball_inf(edge, true).lo == Rat(7, 16));
  CHECK(g.code.honest_ball_inf(edge, false).lo == Rat(2));

  // the witness attains the reported infimum
  auto w = g.code.honest_witness(Ball{Point(Rat(1, 2)), Rat(1, 4)}, true);
  REQUIRE(w.has_value());
  CHECK(g.code.upper_evidence(*w) == ExtRat(Rat(7, 16)));
}

TEST_CASE("supremum gadget validation") {
  CHECK_THROWS_AS(aca_sup_gadget({}), std::invalid_argument);
  CHECK_THROWS_AS(aca_sup_gadget({Rat(1, 2), Rat(1, 2)}), std::invalid_argument);
  CHECK_THROWS_AS(aca_sup_gadget({Rat(1, 2), Rat(1, 4)}), std::invalid_argument);
  CHECK_THROWS_AS(aca_sup_gadget({Rat(-1, 4)}), std::invalid_argument);
  CHECK_THROWS_AS(aca_sup_gadget({Rat(1, 2), Rat(5, 4)}), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST_CASE("pairing map: frozen values and monotonicity") {
  CHECK(pair_index(0, 0) == 0);
  CHECK(pair_index(1, 0) == 1);
  CHECK(pair_index(0, 1) == 2);
  CHECK(pair_index(2, 0) == 3);
  CHECK(pair_index(1, 1) == 4);
  CHECK(pair_index(0, 2) == 5);
  CHECK(pair_index(3, 0) == 6);

  std::set<std::uint64_t> seen;
  for (std::uint32_t i = 0; i < 40; ++i) {
    for (std::uint32_t n = 0; n < 40; ++n) {
      std::uint64_t v = pair_index(i, n);
      CHECK(seen.insert(v).second);  // injective
      if (i > 0) CHECK(pair_index(i - 1, n) < v);
      if (n > 0) CHECK(pair_index(i, n - 1) < v);
    }
    CHECK(pair_index(i, 0) == static_cast<std::uint64_t>(i) * (i + 1) / 2);
    CHECK(pair_index(i, 0) >= i);
  }
}

TEST_CASE("tree-family gadget: oracle, exact value, decode") {
  std::vector<TreeSpec> family{
      chain_tree(0, 8),                  // threads a depth-8 path
      make_tree({{}, {0}, {1}}, 8, 2),   // does not
      chain_tree(1, 8, {{0}}),           // threads a depth-8 path
      complete_tree(2),                  // does not
  };
  Pi11Gadget g = pi11_gadget(family);
  CHECK(g.trees.size() == 4);

  Point oracle = pi11_oracle_point(g);
  std::set<std::size_t> ones{3, 7, 12, 18, 25, 33, 42, 52};
  for (std::size_t k = 0; k < 60; ++k)
    CHECK(oracle.seq_at(k) == (ones.count(k) ? 1u : 0u));

  CHECK(g.code.value_exact(oracle)->get() == Rat(5, 8));
  CHECK(g.code.value_exact(Point(Seq{}))->get() == Rat(7, 8));

  std::vector<std::uint32_t> decoded = pi11_decode(g, oracle);
  CHECK(decoded == std::vector<std::uint32_t>{0, 2});
  std::vector<std::uint32_t> dfs;
  for (std::uint32_t i = 0; i < family.size(); ++i)
    if (ref_has_path(family[i], family[i].depth_bound)) dfs.push_back(i);
  CHECK(decoded == dfs);

  // challenger rewrites only help trees that actually have full paths
  std::vector<Point> from_zero = pi11_challenger_net(g, Point(Seq{}));
  CHECK(from_zero.size() == 2);  // zero already threads tree 0; tree 2 rewrite added
  std::vector<Point> from_oracle = pi11_challenger_net(g, oracle);
  CHECK(from_oracle.size() == 1);  // the oracle already threads everything
}

TEST_CASE("tree-family gadget: criticality verdicts") {
  std::vector<TreeSpec> family{
      chain_tree(0, 8),
      make_tree({{}, {0}, {1}}, 8, 2),
      chain_tree(1, 8, {{0}}),
      complete_tree(2),
  };
  Pi11Gadget g = pi11_gadget(family);
  Point oracle = pi11_oracle_point(g);
  Point zero(Seq{});

  // pooled challenger net so the oracle faces nontrivial competitors
  std::vector<Point> pool = pi11_challenger_net(g, zero);
  pool.push_back(oracle);

  SearchParams params;
  params.epsilon = Rat(1);
  params.resolution = 8;
  params.region = explicit_region(pool);
  CriticalityCertificate good = is_critical(g.code, oracle, params);
  CHECK(good.pass);
  CHECK(recheck_certificate(good));
  CHECK(good.f_upper_x == Rat(5, 8));

  SearchParams tight = params;
  tight.epsilon = pow2(-12);
  CriticalityCertificate bad = is_critical(g.code, zero, tight);
  CHECK_FALSE(bad.pass);
  REQUIRE(bad.witness.has_value());
  CHECK(bad.witness->distance == Rat(1, 8));  // slice rewrite first differs at 3
  CHECK(bad.witness->f_lower_y == Rat(5, 8));
  CHECK(bad.f_upper_x == Rat(7, 8));
}

TEST_CASE("tree-family gadget validation") {
  CHECK_THROWS_AS(pi11_gadget({}), std::invalid_argument);
  std::vector<TreeSpec> many(17, root_tree());
  CHECK_THROWS_AS(pi11_gadget(many), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST_CASE("pseudofibration: projection inverts the section exactly") {
  Rat a(0), b(1);
  for (const Point& xp : net(Space::unit_interval(), 3)) {
    const Rat& x = xp.rat();
    for (const Rat& y : {Rat(0), Rat(1, 3), Rat(1, 2), Rat(1)}) {
      Point z = pseudofib_iota(embed_unit(x), y, a, b);
      CHECK(pseudofib_pi(z, a, b) == y);
    }
  }

  // curve shape: y at 0, linear ramp to the curve value at 1/2
  Point z = pseudofib_iota(embed_unit(Rat(1, 4)), Rat(1, 2), a, b);
  CHECK(z.pl().eval(Rat(0)) == Rat(1, 2));
  CHECK(z.pl().eval(Rat(1, 4)) == Rat(3, 8));
  CHECK(z.pl().eval(Rat(1, 2)) == Rat(1, 4));
  CHECK(z.pl().eval(Rat(1)) == Rat(1, 4));

  // the projection clamps into the carried range
  CHECK(pseudofib_pi(Point(PLFunc::constant(Rat(2))), a, b) == Rat(1));
  CHECK(pseudofib_pi(Point(PLFunc::constant(Rat(-1))), a, b) == Rat(0));

  CHECK_THROWS_AS(pseudofib_iota(embed_unit(Rat(0)), Rat(2), a, b), std::invalid_argument);
  CHECK_THROWS_AS(pseudofib_iota(embed_unit(Rat(0)), Rat(0), Rat(1), Rat(0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(pseudofib_iota(Point(Rat(0)), Rat(0), a, b), std::invalid_argument);
  CHECK_THROWS_AS(pseudofib_pi(Point(Rat(0)), a, b), std::invalid_argument);
  CHECK_THROWS_AS(embed_unit(Rat(2)), std::invalid_argument);
}

TEST_CASE("pseudofibration: section distances and projection Lipschitz bound") {
  Space c01 = Space::c01();
  Rat a(0), b(1);

  // d(iota(x,y), iota(x',y')) = max(|x-x'|, |y-y'|), exactly
  std::vector<Rat> xs, ys{Rat(0), Rat(1, 2), Rat(1)};
  for (const Point& p : net(Space::unit_interval(), 2)) xs.push_back(p.rat());
  std::vector<std::pair<Point, std::pair<Rat, Rat>>> pts;
  for (const Rat& x : xs)
    for (const Rat& y : ys)
      pts.push_back({pseudofib_iota(embed_unit(x), y, a, b), {x, y}});
  for (const auto& [z1, xy1] : pts)
    for (const auto& [z2, xy2] : pts) {
      Rat want = rat_max(rat_abs(xy1.first - xy2.first), rat_abs(xy1.second - xy2.second));
      CHECK(dist(c01, z1, z2) == want);
    }

  // pi is 1-Lipschitz on arbitrary curves, including clamped ones
  std::vector<Point> curves{
      Point(PLFunc({{Rat(0), Rat(1, 4)}, {Rat(1), Rat(3, 4)}})),
      Point(PLFunc({{Rat(0), Rat(1)}, {Rat(1, 2), Rat(0)}, {Rat(1), Rat(1)}})),
      Point(PLFunc::constant(Rat(2))),
      Point(PLFunc::constant(Rat(-1, 2))),
      pseudofib_iota(embed_unit(Rat(1, 3)), Rat(2, 3), a, b),
  };
  for (const Point& g1 : curves)
    for (const Point& g2 : curves)
      CHECK(rat_abs(pseudofib_pi(g1, a, b) - pseudofib_pi(g2, a, b)) <= dist(c01, g1, g2));
}

TEST_CASE("hat-sum embedding: intervals, curve shape, exact distances") {
  // frozen interval endpoints
  CHECK(embed_baire_interval(0, 0) == std::make_pair(Rat(0), Rat(1, 4)));
  CHECK(embed_baire_interval(0, 1) == std::make_pair(Rat(1, 4), Rat(3, 8)));
  CHECK(embed_baire_interval(1, 0) == std::make_pair(Rat(1, 2), Rat(5, 8)));

  // per level the hat intervals chain left to right below 1 - 2^-(n+1)
  for (std::uint32_t n = 0; n < 4; ++n) {
    for (std::uint32_t m = 0; m < 4; ++m) {
      auto [lo, hi] = embed_baire_interval(n, m);
      CHECK(lo < hi);
      CHECK(hi < Rat(1) - pow2(-static_cast<long>(n) - 1));
      CHECK(embed_baire_interval(n, m + 1).first == hi);
    }
    // levels live in disjoint bands
    CHECK(embed_baire_interval(n + 1, 0).first >= Rat(1) - pow2(-static_cast<long>(n) - 1));
  }

  // curve carries a height 2^-n hat at J(n, x(n)) and vanishes between
  Point e = embed_baire(Point(Seq{2, 1}), 4);
  auto [l0, h0] = embed_baire_interval(0, 2);
  auto [l1, h1] = embed_baire_interval(1, 1);
  CHECK(e.pl().eval((l0 + h0) / 2) == Rat(1));
  CHECK(e.pl().eval((l1 + h1) / 2) == Rat(1, 2));
  CHECK(e.pl().eval(l0) == Rat(0));
  CHECK(e.pl().eval(h0) == Rat(0));
  CHECK(e.pl().eval(Rat(0)) == Rat(0));
  CHECK(e.pl().eval(Rat(1)) == Rat(0));
  auto [l2, h2] = embed_baire_interval(2, 0);
  CHECK(e.pl().eval((l2 + h2) / 2) == Rat(1, 4));

  // exhaustive exactness: all sequences of length <= 2 with entries < 4
  Space baire = Space::baire();
  Space c01 = Space::c01();
  std::vector<Point> pts;
  pts.push_back(Point(Seq{}));
  for (std::uint32_t a = 0; a < 4; ++a) {
    pts.push_back(Point(Seq{a}));
    for (std::uint32_t b2 = 0; b2 < 4; ++b2) pts.push_back(Point(Seq{a, b2}));
  }
  for (const Point& x : pts)
    for (const Point& y : pts)
      CHECK(dist(c01, embed_baire(x, 6), embed_baire(y, 6)) == dist(baire, x, y));

  // deep prefix family: disagreements at every index below the depth
  std::vector<Point> ones;
  for (std::uint32_t k = 0; k <= 6; ++k) ones.push_back(Point(Seq(k, 1u)));
  for (const Point& x : ones)
    for (const Point& y : ones)
      CHECK(dist(c01, embed_baire(x, 6), embed_baire(y, 6)) == dist(baire, x, y));

  CHECK_THROWS_AS(embed_baire(Point(Seq(7, 0u)), 6), std::invalid_argument);
  CHECK_THROWS_AS(embed_baire(Point(Rat(0)), 6), std::invalid_argument);
  CHECK_THROWS_AS(embed_baire(Point(Seq{(1u << 20) + 1}), 4), std::invalid_argument);
}

TEST_CASE("hat-sum embedding: decode inverts and rejects foreign curves") {
  Space baire = Space::baire();
  std::vector<Seq> seqs{{}, {1}, {3}, {0, 2}, {2, 1}, {1, 0, 3}};
  for (const Seq& s : seqs) {
    Point x(s);
    auto dec = embed_baire_decode(embed_baire(x, 6).pl(), 6);
    REQUIRE(dec.has_value());
    CHECK(point_eq(baire, Point(*dec), x));
  }

  CHECK_FALSE(embed_baire_decode(PLFunc::constant(Rat(1, 2)), 6).has_value());
  CHECK_FALSE(embed_baire_decode(PLFunc::constant(Rat(0)), 6).has_value());

  // the entry cap bounds the scan: a large entry needs a larger cap
  PLFunc big = embed_baire(Point(Seq{70}), 4).pl();
  CHECK_FALSE(embed_baire_decode(big, 4).has_value());
  auto dec = embed_baire_decode(big, 4, 128);
  REQUIRE(dec.has_value());
  CHECK(point_eq(baire, Point(*dec), Point(Seq{70})));
}

// ---------------------------------------------------------------------------

TEST_CASE("curve-space lift: slice values, projection, end-to-end descent") {
  LscCode f = identity_lsc();
  LvpLift lift = lvp_to_fvp_lift(f, EmbedKind::Unit, Rat(0), Rat(1), 4);

  REQUIRE(lift.candidates.size() == 17);
  CHECK(lift.slack == pow2(-5));
  for (std::size_t i = 0; i < lift.candidates.size(); ++i)
    CHECK(lift.value_floor[i] == lift.candidates[i].rat());

  // on the sampled graph slice the lifted potential equals the height
  for (std::size_t i : {std::size_t{0}, std::size_t{8}, std::size_t{16}}) {
    Point z = lift.lift_point(lift.candidates[i], lift.value_floor[i]);
    auto v = lift.code.value_exact(z);
    REQUIRE(v.has_value());
    CHECK(*v == lift.value_floor[i]);
  }
  // anywhere above the floor along a sampled fiber as well
  Point mid = lift.lift_point(Point(Rat(1, 2)), Rat(3, 4));
  CHECK(lift.code.value_exact(mid) == Rat(3, 4));

  // below the floor the slice distance pushes the value up
  Point low = lift.lift_point(Point(Rat(1, 2)), Rat(0));
  REQUIRE(lift.code.value_exact(low).has_value());
  CHECK(*lift.code.value_exact(low) >= Rat(1, 4));

  // projection round-trip
  CHECK(lift.project(lift.lift_point(Point(Rat(1, 3)), Rat(2, 3))) == Rat(2, 3));

  // search over the lifted slice finds the bottom of the original potential
  std::vector<Point> slice;
  for (std::size_t i = 0; i < lift.candidates.size(); ++i)
    slice.push_back(lift.lift_point(lift.candidates[i], lift.value_floor[i]));
  SearchParams params;
  params.epsilon = Rat(1);
  params.resolution = 6;
  params.region = explicit_region(slice);
  SearchResult res = fvp_search(lift.code, params);
  CHECK(res.certificate.pass);
  Rat projected = lift.project(res.x_star);
  CHECK(projected <= pow2(-4));

  // the projected point is critical for the original potential
  SearchParams back;
  back.epsilon = Rat(1);
  back.resolution = 8;
  CriticalityCertificate cert = is_critical(f, Point(projected), back);
  CHECK(cert.pass);
}

TEST_CASE("curve-space lift: sequence-space sampling") {
  std::vector<TreeSpec> family{
      chain_tree(0, 8),
      make_tree({{}, {0}, {1}}, 8, 2),
      chain_tree(1, 8, {{0}}),
      complete_tree(2),
  };
  Pi11Gadget g = pi11_gadget(family);
  LvpLift lift = lvp_to_fvp_lift(g.code, EmbedKind::Baire, Rat(0), Rat(1), 4, 4096, 2);

  // only length-2 samples whose first slice threads tree 0 stay within range
  CHECK(lift.candidates.size() == 4);
  for (std::size_t i = 0; i < lift.candidates.size(); ++i) {
    CHECK(lift.candidates[i].seq_at(0) == 0);
    CHECK(lift.value_floor[i] == Rat(7, 8));
    Point z = lift.lift_point(lift.candidates[i], lift.value_floor[i]);
    CHECK(lift.code.value_exact(z) == Rat(7, 8));
    CHECK(lift.project(z) == Rat(7, 8));
  }
}

TEST_CASE("curve-space lift validation") {
  LscCode f = identity_lsc();
  CHECK_THROWS_AS(lvp_to_fvp_lift(f, EmbedKind::Unit, Rat(1), Rat(0), 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(lvp_to_fvp_lift(f, EmbedKind::Unit, Rat(0), Rat(1), -1),
                  std::invalid_argument);
  CHECK_THROWS_AS(lvp_to_fvp_lift(f, EmbedKind::Baire, Rat(0), Rat(1), 4),
                  std::invalid_argument);

  LscCode cant = lsc_const(Space::cantor(), Rat(0));
  CHECK_THROWS_AS(lvp_to_fvp_lift(cant, EmbedKind::Unit, Rat(0), Rat(1), 4),
                  std::invalid_argument);

  // every sampled floor sits above the carried range: no effective support
  LscCode tall = lsc_const(Space::unit_interval(), Rat(5));
  CHECK_THROWS_AS(lvp_to_fvp_lift(tall, EmbedKind::Unit, Rat(0), Rat(1), 4),
                  EmptySupportError);
}
