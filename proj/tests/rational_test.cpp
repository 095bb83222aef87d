#include <doctest.h>

#include <evp/codes.hpp>
#include <evp/rational.hpp>

#include <stdexcept>

using namespace evp;

TEST_CASE("pow2 produces exact dyadics") {
  CHECK(pow2(0) == Rat(1));
  CHECK(pow2(3) == Rat(8));
  CHECK(pow2(-1) == Rat(1, 2));
  CHECK(pow2(-10) == Rat(1, 1024));
  CHECK(pow2(-4) * pow2(4) == Rat(1));
}

TEST_CASE("parse_rat accepts integers, fractions, decimals, dyadic shorthand") {
  CHECK(parse_rat("7") == Rat(7));
  CHECK(parse_rat("-3") == Rat(-3));
  CHECK(parse_rat("2/3") == Rat(2, 3));
  CHECK(parse_rat("-4/6") == Rat(-2, 3));
  CHECK(parse_rat("0.25") == Rat(1, 4));
  CHECK(parse_rat("1.5") == Rat(3, 2));
  CHECK(parse_rat("2^-8") == pow2(-8));
  CHECK(parse_rat("3*2^-10") == Rat(3) * pow2(-10));
  CHECK(parse_rat("2^4") == Rat(16));
  CHECK_THROWS_AS(parse_rat("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rat("banana"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rat(""), std::invalid_argument);
}

TEST_CASE("rat_str is canonical and round-trips through parse_rat") {
  CHECK(rat_str(Rat(1, 2)) == "1/2");
  CHECK(rat_str(Rat(4)) == "4");
  CHECK(rat_str(Rat(-6, 4)) == "-3/2");
  for (const char* s : {"7", "-3/5", "255/256", "0"}) {
    CHECK(rat_str(parse_rat(s)) == s);
  }
}

TEST_CASE("rat_abs / rat_min / rat_max") {
  CHECK(rat_abs(Rat(-5, 3)) == Rat(5, 3));
  CHECK(rat_abs(Rat(5, 3)) == Rat(5, 3));
  CHECK(rat_min(Rat(1, 3), Rat(1, 4)) == Rat(1, 4));
  CHECK(rat_max(Rat(1, 3), Rat(1, 4)) == Rat(1, 3));
}

TEST_CASE("ExtRat ordering and arithmetic treat infinity consistently") {
  ExtRat a(Rat(1, 2));
  ExtRat inf = ExtRat::inf();
  CHECK(a.finite());
  CHECK(inf.infinite);
  CHECK(a < inf);
  CHECK_FALSE(inf < a);
  CHECK_FALSE(inf < inf);
  CHECK(inf <= inf);
  CHECK(ExtRat(Rat(1, 2)) == a);
  CHECK_FALSE(a == inf);
  CHECK((a + Rat(1, 2)).get() == Rat(1));
  CHECK((inf + Rat(5)).infinite);
  CHECK((a + ExtRat(Rat(1))).get() == Rat(3, 2));
  CHECK((a + inf).infinite);
  CHECK(ext_min(a, inf) == a);
  CHECK(ext_max(a, inf) == inf);
  CHECK(ext_scale(a, Rat(3)).get() == Rat(3, 2));
  CHECK(ext_scale(inf, Rat(3)).infinite);
  CHECK_THROWS_AS(inf.get(), std::logic_error);
  CHECK(ext_str(a) == rat_str(Rat(1, 2)));
  CHECK(ext_str(inf) == "inf");
}

TEST_CASE("Bracket validates, measures, and intersects") {
  Bracket b(Rat(1, 4), ExtRat(Rat(1, 2)));
  CHECK(b.lo == Rat(1, 4));
  CHECK(b.hi.get() == Rat(1, 2));
  CHECK(b.width().get() == Rat(1, 4));
  CHECK(b.mid() == Rat(3, 8));
  CHECK_FALSE(b.is_exact());

  Bracket e = Bracket::exact(Rat(2, 7));
  CHECK(e.is_exact());
  CHECK(e.width().get() == Rat(0));
  CHECK(e.mid() == Rat(2, 7));

  Bracket unb(Rat(0), ExtRat::inf());
  CHECK(unb.width().infinite);
  CHECK_THROWS_AS(unb.mid(), std::logic_error);

  CHECK_THROWS_AS(Bracket(Rat(1), ExtRat(Rat(0))), std::invalid_argument);

  Bracket c(Rat(0), ExtRat(Rat(1)));
  Bracket d(Rat(1, 2), ExtRat(Rat(3)));
  c.intersect(d);
  CHECK(c.lo == Rat(1, 2));
  CHECK(c.hi.get() == Rat(1));
  Bracket far(Rat(5), ExtRat(Rat(6)));
  CHECK_THROWS_AS(c.intersect(far), std::logic_error);
}

TEST_CASE("Modulus evaluates, clamps at zero, and reports input radii") {
  Modulus m0{0};
  CHECK(m0.at(0) == 0);
  CHECK(m0.at(7) == 7);
  CHECK(m0.input_radius(3) == pow2(-3));

  Modulus up{2};
  CHECK(up.at(0) == 2);
  CHECK(up.at(5) == 7);

  Modulus down{-2};
  CHECK(down.at(0) == 0);
  CHECK(down.at(1) == 0);
  CHECK(down.at(2) == 0);
  CHECK(down.at(3) == 1);
  CHECK(down.input_radius(0) == Rat(1));
}

TEST_CASE("Modulus::osc_bound brackets oscillation from the input radius") {
  Modulus m{0};
  CHECK(m.osc_bound(Rat(0)) == ExtRat(Rat(0)));
  CHECK(m.osc_bound(Rat(1)).infinite);
  CHECK(m.osc_bound(Rat(2)).infinite);
  // 1/4 < 2^-1 = input_radius(1) but 1/4 >= input_radius(2): bound 2^-1.
  CHECK(m.osc_bound(Rat(1, 4)) == ExtRat(Rat(1, 2)));
  // 1/5 < 2^-2 = input_radius(2), so the tighter bound 2^-2 applies.
  CHECK(m.osc_bound(Rat(1, 5)) == ExtRat(Rat(1, 4)));
  CHECK(m.osc_bound(pow2(-9)) == ExtRat(pow2(-8)));

  Modulus steep{3};  // h(n) = n + 3: radius 2^-(n+3) forces osc 2^-n
  CHECK(steep.osc_bound(pow2(-3)).infinite);  // at the edge of h(0)
  CHECK(steep.osc_bound(pow2(-4)) == ExtRat(Rat(1)));
  CHECK(steep.osc_bound(pow2(-6)) == ExtRat(pow2(-2)));
}

TEST_CASE("Modulus::scaled shifts by ceil(log2 factor)") {
  Modulus m{0};
  CHECK(m.scaled(Rat(1)).shift == 0);
  CHECK(m.scaled(Rat(2)).shift == 1);
  CHECK(m.scaled(Rat(3)).shift == 2);   // ceil log2 3 = 2
  CHECK(m.scaled(Rat(4)).shift == 2);
  CHECK(m.scaled(Rat(1, 2)).shift == -1);
  CHECK(m.scaled(Rat(1, 3)).shift == -1);  // ceil log2 (1/3) = -1
  CHECK(m.scaled(Rat(1, 4)).shift == -2);
  Modulus base{5};
  CHECK(base.scaled(Rat(2)).shift == 6);
}
