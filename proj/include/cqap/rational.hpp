#pragma once

#include <gmpxx.h>

#include <string>
#include <vector>

namespace cqap {

using Rational = mpq_class;

// "p/q" or "p" when the denominator is 1.
std::string to_string(const Rational& r);

// Accepts "p", "p/q", "-p/q" and finite decimals such as "1.5".
Rational parse_rational(const std::string& text);

double to_double(const Rational& r);

Rational lcm_of_denominators(const std::vector<Rational>& values);

}  // namespace cqap
