#include "cqap/bound.hpp"

#include "cqap/errors.hpp"

#include <cctype>
#include <cmath>

namespace cqap {

BoundAssignment BoundAssignment::standard(const Rational& log_n, const Rational& log_q) {
  BoundAssignment a;
  a.log_values["N"] = log_n;
  a.log_values["Q"] = log_q;
  return a;
}

Rational BoundAssignment::log_of(const std::string& base) const {
  auto it = log_values.find(base);
  if (it != log_values.end()) return it->second;
  if (!base.empty() && std::isdigit(static_cast<unsigned char>(base[0]))) {
    Rational v = parse_rational(base);
    if (v <= 0) throw InvalidArgument("bound literal must be positive: " + base);
    // Rational approximation of log2 with denominator 1024.
    double l = std::log2(v.get_d());
    Rational r(static_cast<long>(std::llround(l * 1024.0)), 1024);
    r.canonicalize();
    return r;
  }
  throw InvalidArgument("no value assigned to bound base '" + base + "'");
}

SymbolicBound SymbolicBound::base(const std::string& name, const Rational& exponent) {
  SymbolicBound b;
  b.exps_[name] = exponent;
  b.normalize();
  return b;
}

Rational SymbolicBound::exponent(const std::string& base) const {
  auto it = exps_.find(base);
  return it == exps_.end() ? Rational(0) : it->second;
}

SymbolicBound SymbolicBound::operator*(const SymbolicBound& o) const {
  SymbolicBound r = *this;
  r *= o;
  return r;
}

SymbolicBound& SymbolicBound::operator*=(const SymbolicBound& o) {
  for (const auto& [k, v] : o.exps_) exps_[k] += v;
  normalize();
  return *this;
}

SymbolicBound SymbolicBound::pow(const Rational& k) const {
  SymbolicBound r = *this;
  for (auto& [_, v] : r.exps_) v *= k;
  r.normalize();
  return r;
}

Rational SymbolicBound::log_value(const BoundAssignment& a) const {
  Rational s = 0;
  for (const auto& [k, v] : exps_) s += v * a.log_of(k);
  return s;
}

std::string SymbolicBound::to_string() const {
  if (exps_.empty()) return "1";
  std::string out;
  for (const auto& [k, v] : exps_) {
    if (!out.empty()) out += "*";
    out += k;
    if (v != 1) {
      std::string e = cqap::to_string(v);
      out += "^" + (e.find('/') != std::string::npos || v < 0 ? "(" + e + ")" : e);
    }
  }
  return out;
}

SymbolicBound SymbolicBound::parse(const std::string& text) {
  SymbolicBound b;
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  if (s.empty()) throw InvalidArgument("empty bound");
  if (s == "1") return b;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.')) ++j;
    if (j == i) throw InvalidArgument("malformed bound '" + text + "'");
    std::string name = s.substr(i, j - i);
    Rational e = 1;
    i = j;
    if (i < s.size() && s[i] == '^') {
      ++i;
      std::string ex;
      if (i < s.size() && s[i] == '(') {
        auto close = s.find(')', i);
        if (close == std::string::npos) throw InvalidArgument("unbalanced parenthesis in '" + text + "'");
        ex = s.substr(i + 1, close - i - 1);
        i = close + 1;
      } else {
        std::size_t k = i;
        while (k < s.size() && s[k] != '*') ++k;
        ex = s.substr(i, k - i);
        i = k;
      }
      e = parse_rational(ex);
    }
    b.exps_[name] += e;
    if (i < s.size()) {
      if (s[i] != '*') throw InvalidArgument("malformed bound '" + text + "'");
      ++i;
      if (i == s.size()) throw InvalidArgument("trailing '*' in bound '" + text + "'");
    }
  }
  b.normalize();
  return b;
}

void SymbolicBound::normalize() {
  for (auto it = exps_.begin(); it != exps_.end();) {
    if (it->second == 0)
      it = exps_.erase(it);
    else
      ++it;
  }
}

}  // namespace cqap
