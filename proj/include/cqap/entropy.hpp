#pragma once

#include "cqap/bound.hpp"
#include "cqap/query.hpp"
#include "cqap/rational.hpp"
#include "cqap/rules.hpp"
#include "cqap/simplex.hpp"
#include "cqap/varset.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace cqap {

constexpr int kMaxLpVars = 8;

// Set function over 2^[n], indexed by bitmask; values[0] = h(empty) = 0.
struct SetFunction {
  int n = 0;
  std::vector<Rational> values;

  static SetFunction zero(int n);
  static SetFunction modular(const std::vector<Rational>& weights);
  const Rational& operator()(VarSet s) const { return values[s.bits()]; }
  Rational& operator[](VarSet s) { return values[s.bits()]; }
};

// Floating point set function, used for entropies of random distributions.
struct SetFunctionD {
  int n = 0;
  std::vector<double> values;

  double operator()(VarSet s) const { return values[s.bits()]; }
};

bool check_polymatroid(const SetFunction& h, std::string* why = nullptr);
bool check_polymatroid(const SetFunctionD& h, double tol = 1e-9, std::string* why = nullptr);

// Conic combination of modular, uniform-matroid, GF(2)-linear-matroid and
// coverage functions with small integer weights.
SetFunction random_polymatroid(int n, std::mt19937_64& rng);
// Entropy (bits) of a random joint distribution, each variable on at most 4 values.
SetFunctionD random_entropic(int n, std::mt19937_64& rng);

// Coefficients indexed by (X, Y) with X a proper subset of Y; h(Y|X) = h(Y) - h(X).
class ConditionalVector {
 public:
  using Key = std::pair<std::uint32_t, std::uint32_t>;  // (x bits, y bits)

  void add(VarSet x, VarSet y, const Rational& c);
  Rational get(VarSet x, VarSet y) const;
  void set(VarSet x, VarSet y, const Rational& c);
  const std::map<Key, Rational>& coeffs() const { return coeffs_; }
  bool empty() const { return coeffs_.empty(); }

  Rational norm1() const;
  ConditionalVector scaled(const Rational& k) const;
  ConditionalVector operator+(const ConditionalVector& o) const;
  bool nonnegative() const;

  Rational eval(const SetFunction& h) const;
  double eval(const SetFunctionD& h) const;
  // Net coefficient of h(Z) once every h(Y|X) is expanded.
  std::map<std::uint32_t, Rational> inflow() const;

  bool operator==(const ConditionalVector& o) const { return coeffs_ == o.coeffs_; }

 private:
  std::map<Key, Rational> coeffs_;
};

// Dual multipliers of the submodularity and monotonicity rows.
struct Witness {
  std::map<std::pair<std::uint32_t, std::uint32_t>, Rational> sigma;  // (I, J), I and J incomparable
  std::map<std::pair<std::uint32_t, std::uint32_t>, Rational> mu;     // (X, Y), X strictly inside Y

  Witness scaled(const Rational& k) const;
  // Net coefficient of h(Z) contributed by the witness terms.
  std::map<std::uint32_t, Rational> inflow() const;
};

// <delta, h> >= <lambda, h> with a witness.
struct ShannonFlow {
  int n = 0;
  ConditionalVector delta;
  ConditionalVector lambda;
  Witness witness;
};

// Exact check that delta, the witness and lambda satisfy every inflow constraint.
bool check_witness(const ShannonFlow& f, std::string* why = nullptr);

// One split constraint of the joint inequality with its two dual weights:
// xy weighs hS(X) + hT(Y|X), yx weighs hS(Y|X) + hT(X).
struct SplitTerm {
  SplitConstraint sc;
  Rational gamma_xy;
  Rational gamma_yx;
};

struct JointInequality {
  int n = 0;
  ConditionalVector delta_s;
  ConditionalVector delta_t;
  std::vector<SplitTerm> gamma;
  ConditionalVector theta;   // (empty, B) coordinates over S-targets
  ConditionalVector lambda;  // (empty, B) coordinates over T-targets
  Witness witness_s;
  Witness witness_t;
  SymbolicBound rhs;  // product of bounds raised to their dual weights

  ConditionalVector g_s() const;
  ConditionalVector g_t() const;
  ShannonFlow s_side() const;
  ShannonFlow t_side() const;

  Rational theta_norm() const { return theta.norm1(); }
  Rational lambda_norm() const { return lambda.norm1(); }
};

// Exact witness check of both participating inequalities.
bool check_joint_witness(const JointInequality& ineq, std::string* why = nullptr);

struct VerifyReport {
  bool ok = true;
  int trials = 0;
  std::string counterexample;
};

// Random polymatroid pairs: alternately exact conic combinations and entropic functions.
VerifyReport verify_joint_inequality(const JointInequality& ineq, int trials, std::uint64_t seed = 1);
VerifyReport verify_shannon_flow(const ShannonFlow& f, int trials, std::uint64_t seed = 1);

// Constraints of a query resolved under an assignment: best DC, best DC plus AC
// and the spanned split constraints.
struct LpContext {
  int n = 0;
  std::vector<DegreeConstraint> dc;
  std::vector<DegreeConstraint> dc_ac;
  std::vector<SplitConstraint> sc;
  BoundAssignment assignment;

  static LpContext from_query(const Cqap& q, const BoundAssignment& a);
};

enum class ObjStatus { Finite, MaterializeAll, Unbounded };

struct JointSolution {
  ObjStatus status = ObjStatus::Finite;
  Rational obj;
  std::optional<Rational> s_max;  // polymatroid bound of the S-targets
  SetFunction h_s;
  SetFunction h_t;
  JointInequality ineq;
  int pivots = 0;
};

// max over polymatroids in DC of min over targets of h(B).
Rational polymatroid_bound(const LpContext& ctx, const std::vector<VarSet>& targets);

// OPT(S) of a rule with the joint inequality read off the optimal dual.
JointSolution solve_joint_lp(const LpContext& ctx, const TwoPhaseRule& rule, const Rational& log_s,
                             LpMethod method = LpMethod::Hybrid);

// The value of the weighted program for fixed (lambda, theta): ell - logS * |theta|.
Rational weighted_lp_value(const LpContext& ctx, const TwoPhaseRule& rule, const std::map<VarSet, Rational>& lambda,
                           const std::map<VarSet, Rational>& theta, const Rational& log_s);

// Represents S^space_exp * T^time_exp ~= rhs.
struct TradeoffTerm {
  Rational space_exp;
  Rational time_exp = 1;
  SymbolicBound rhs;
  std::string origin;  // lp, bfs, edge-cover, path, catalog, materialize
  std::optional<JointInequality> ineq;

  // logT as a function of logS under an assignment; time_exp must be positive.
  Rational log_time(const Rational& log_s, const BoundAssignment& a) const;
  // Scaled to the smallest integer exponents: "S*T^2 ~= N^2*Q^2".
  std::string to_string() const;
  // Same line after normalizing time_exp to 1.
  bool same_line(const TradeoffTerm& o) const;
  TradeoffTerm normalized() const;
};

TradeoffTerm parse_term(const std::string& text);

struct RuleTradeoff {
  std::vector<TradeoffTerm> terms;  // lower envelope pieces found by the sweep
  std::optional<Rational> s_max;
  bool unbounded = false;
};

// Sweeps logS over [0, s_max] and collects the distinct optimal dual lines.
RuleTradeoff sweep_rule(const LpContext& ctx, const TwoPhaseRule& rule, LpMethod method = LpMethod::Hybrid);

// Looks for a joint inequality proving the term for the rule. Tries several
// weightings of the bases and accepts a dual whose exponents are all no larger.
std::optional<JointInequality> certify_term(const LpContext& ctx, const TwoPhaseRule& rule, const TradeoffTerm& term);

TradeoffTerm bfs_term();

// Rule T_[n] or S_A and its edge cover term; alpha is infinite when A = [n].
struct CoverTradeoff {
  TradeoffTerm term;
  TwoPhaseRule rule;
  Rational alpha;
  bool degenerate = false;  // A = [n]: only materialization applies
};
Rational slack(const Cqap& q, const std::vector<Rational>& u, VarSet a, VarSet within);
CoverTradeoff tradeoff_from_edge_cover(const Cqap& q, const std::vector<Rational>& u);

struct PathTradeoff {
  TradeoffTerm term;
  TwoPhaseRule rule;
  std::vector<Rational> alphas;
};
// covers[t] gives one weight per atom for node t; path lists nodes from the root.
PathTradeoff tradeoff_from_path(const Cqap& q, const TreeDecomp& d, const std::vector<std::vector<Rational>>& covers,
                                const std::vector<int>& path);

// Piecewise linear logT(logS) as (logS, logT) breakpoints.
struct TradeoffCurve {
  std::vector<std::pair<Rational, Rational>> points;

  Rational at(const Rational& log_s) const;
  std::string to_csv() const;
};

TradeoffCurve envelope(const std::vector<std::vector<TradeoffTerm>>& rule_terms, const BoundAssignment& a);

nlohmann::json varset_to_json(VarSet s, const std::vector<std::string>& names);
VarSet varset_from_json(const nlohmann::json& j, const std::vector<std::string>& names);
nlohmann::json conditional_to_json(const ConditionalVector& v, const std::vector<std::string>& names);
ConditionalVector conditional_from_json(const nlohmann::json& j, const std::vector<std::string>& names);
nlohmann::json joint_to_json(const JointInequality& ineq, const std::vector<std::string>& names);
nlohmann::json term_to_json(const TradeoffTerm& t, const std::vector<std::string>& names);

}  // namespace cqap
