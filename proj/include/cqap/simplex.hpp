#pragma once

#include "cqap/rational.hpp"

#include <string>
#include <utility>
#include <vector>

namespace cqap {

// max c.x subject to A x <= b, x >= 0.
struct LpRow {
  std::vector<std::pair<int, Rational>> coeffs;
  Rational rhs;
  std::string tag;
};

struct LinearProgram {
  int num_vars = 0;
  std::vector<Rational> objective;
  std::vector<LpRow> rows;

  int add_row(std::vector<std::pair<int, Rational>> coeffs, Rational rhs, std::string tag = "");
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Rational value;
  std::vector<Rational> x;  // primal
  std::vector<Rational> y;  // one nonnegative multiplier per row
  int pivots = 0;
  bool warm_started = false;  // optimum found in floating point, then certified exactly
};

enum class LpMethod { Exact, Hybrid };

// Dense tableau simplex. Entering variable by largest reduced cost, switching to
// Bland's rule after a degenerate pivot; ties in the ratio test go to the
// lowest basic index. Hybrid solves in double precision with a Harris ratio
// test and periodic reinversion of the basis, recomputes primal and dual of the
// final basis, rounds them to small-denominator rationals and checks them
// exactly. When that fails it re-pivots the floating point basis in exact
// arithmetic, and falls back to the exact method when that basis is not
// certified either.
LpResult solve_lp(const LinearProgram& lp, LpMethod method = LpMethod::Hybrid);

// Checks primal feasibility, dual feasibility and equal objectives exactly.
bool check_lp_certificate(const LinearProgram& lp, const LpResult& r, std::string* why = nullptr);

}  // namespace cqap
