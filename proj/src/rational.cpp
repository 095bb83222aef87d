#include "evp/rational.hpp"

#include <cctype>

namespace evp {

namespace {

// "2^-8" or "2^10"
bool parse_pow2(const std::string& s, Rat& out) {
  if (s.size() < 3 || s[0] != '2' || s[1] != '^') return false;
  try {
    std::size_t used = 0;
    long k = std::stol(s.substr(2), &used);
    if (used + 2 != s.size()) return false;
    out = pow2(k);
    return true;
  } catch (...) {
    return false;
  }
}

// plain integer, "n/d", or decimal "12.375"
bool parse_plain(const std::string& s, Rat& out) {
  if (s.empty()) return false;
  std::size_t dot = s.find('.');
  if (dot != std::string::npos) {
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    std::size_t frac_len = s.size() - dot - 1;
    if (frac_len == 0 || digits.empty()) return false;
    std::size_t start = (digits[0] == '-' || digits[0] == '+') ? 1 : 0;
    if (start == digits.size()) return false;
    for (std::size_t i = start; i < digits.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(digits[i]))) return false;
    mpz_class num(digits, 10), den = 1;
    for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
    out = Rat(num, den);
    out.canonicalize();
    return true;
  }
  try {
    out = Rat(s);  // handles "n" and "n/d"
  } catch (...) {
    return false;
  }
  if (out.get_den() == 0) return false;  // canonicalize would divide by zero
  out.canonicalize();
  return true;
}

}  // namespace

Rat parse_rat(const std::string& text) {
  std::string s;
  s.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw std::invalid_argument("empty rational literal");

  Rat out;
  if (parse_pow2(s, out)) return out;

  // "a*2^k" shorthand
  std::size_t star = s.find('*');
  if (star != std::string::npos) {
    Rat a, b;
    if (parse_plain(s.substr(0, star), a) && parse_pow2(s.substr(star + 1), b))
      return Rat(a * b);
    throw std::invalid_argument("malformed rational literal: " + text);
  }
  if (parse_plain(s, out)) {
    if (out.get_den() == 0) throw std::invalid_argument("zero denominator: " + text);
    return out;
  }
  throw std::invalid_argument("malformed rational literal: " + text);
}

std::string rat_str(const Rat& x) {
  Rat c = x;
  c.canonicalize();  // two-argument Rat construction does not reduce
  if (c.get_den() == 1) return c.get_num().get_str();
  return c.get_num().get_str() + "/" + c.get_den().get_str();
}

std::string ext_str(const ExtRat& x) {
  return x.finite() ? rat_str(x.value) : std::string("inf");
}

}  // namespace evp
