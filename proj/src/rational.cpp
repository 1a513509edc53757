#include "cqap/rational.hpp"

#include "cqap/errors.hpp"

#include <cctype>

namespace cqap {

std::string to_string(const Rational& r) {
  Rational c = r;
  c.canonicalize();
  if (c.get_den() == 1) return c.get_num().get_str();
  return c.get_num().get_str() + "/" + c.get_den().get_str();
}

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  if (s.empty()) throw InvalidArgument("empty rational");
  auto check_int = [&](const std::string& part) {
    std::size_t i = (!part.empty() && (part[0] == '-' || part[0] == '+')) ? 1 : 0;
    if (i == part.size()) throw InvalidArgument("malformed rational '" + text + "'");
    for (; i < part.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(part[i])))
        throw InvalidArgument("malformed rational '" + text + "'");
  };
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    std::string num = s.substr(0, slash), den = s.substr(slash + 1);
    check_int(num);
    check_int(den);
    mpz_class d(den[0] == '+' ? den.substr(1) : den);
    if (d == 0) throw InvalidArgument("zero denominator in '" + text + "'");
    Rational r(mpz_class(num[0] == '+' ? num.substr(1) : num), d);
    r.canonicalize();
    return r;
  }
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
    bool neg = !ip.empty() && ip[0] == '-';
    if (!ip.empty() && (ip[0] == '-' || ip[0] == '+')) ip = ip.substr(1);
    if (ip.empty()) ip = "0";
    if (fp.empty()) fp = "0";
    check_int(ip);
    check_int(fp);
    mpz_class den = 1;
    for (std::size_t i = 0; i < fp.size(); ++i) den *= 10;
    Rational r(mpz_class(ip) * den + mpz_class(fp), den);
    r.canonicalize();
    return neg ? Rational(-r) : r;
  }
  check_int(s);
  return Rational(mpz_class(s[0] == '+' ? s.substr(1) : s));
}

double to_double(const Rational& r) { return r.get_d(); }

Rational lcm_of_denominators(const std::vector<Rational>& values) {
  mpz_class l = 1;
  for (const auto& v : values) {
    Rational c = v;
    c.canonicalize();
    mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), c.get_den_mpz_t());
  }
  return Rational(l);
}

}  // namespace cqap
