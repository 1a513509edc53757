#pragma once

#include "cqap/rational.hpp"

#include <map>
#include <string>

namespace cqap {

// Log-scale values of the named bases, e.g. N -> 1, Q -> 0.
struct BoundAssignment {
  std::map<std::string, Rational> log_values;

  static BoundAssignment standard(const Rational& log_n = 1, const Rational& log_q = 0);
  // Numeric literals fall back to a rational approximation of log2 unless assigned.
  Rational log_of(const std::string& base) const;
};

// A product of powers of named bases, e.g. N^2 * Q.
class SymbolicBound {
 public:
  SymbolicBound() = default;
  static SymbolicBound base(const std::string& name, const Rational& exponent = 1);
  static SymbolicBound one() { return SymbolicBound(); }

  const std::map<std::string, Rational>& exponents() const { return exps_; }
  Rational exponent(const std::string& base) const;

  SymbolicBound operator*(const SymbolicBound& o) const;
  SymbolicBound pow(const Rational& k) const;
  SymbolicBound& operator*=(const SymbolicBound& o);

  Rational log_value(const BoundAssignment& a) const;
  bool is_one() const { return exps_.empty(); }

  // "N^2*Q", "1" for the empty product.
  std::string to_string() const;
  static SymbolicBound parse(const std::string& text);

  bool operator==(const SymbolicBound& o) const { return exps_ == o.exps_; }

 private:
  void normalize();
  std::map<std::string, Rational> exps_;
};

}  // namespace cqap
