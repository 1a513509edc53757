#include "cqap/entropy.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace cqap {

// ---------------------------------------------------------------------------
// Set functions

SetFunction SetFunction::zero(int n) {
  if (n < 0 || n > kMaxVars) throw InvalidArgument("set function arity out of range");
  SetFunction h;
  h.n = n;
  h.values.assign(std::size_t{1} << n, Rational(0));
  return h;
}

SetFunction SetFunction::modular(const std::vector<Rational>& weights) {
  SetFunction h = zero(static_cast<int>(weights.size()));
  for (std::uint32_t s = 1; s < h.values.size(); ++s)
    for (int v : VarSet(s).members()) h.values[s] += weights[v];
  return h;
}

namespace {

template <class H, class Less>
bool check_poly_impl(const H& h, Less less, std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  const std::uint32_t full = (1u << h.n);
  if (h.values.size() != full) return fail("wrong size");
  if (less(h.values[0], 0) || less(0, h.values[0])) return fail("h(empty) != 0");
  for (std::uint32_t x = 0; x < full; ++x) {
    if (less(h.values[x], 0)) return fail("negative at " + std::to_string(x));
    for (std::uint32_t y = 0; y < full; ++y) {
      if ((x & ~y) == 0 && less(h.values[y], h.values[x]))
        return fail("not monotone: " + std::to_string(x) + " inside " + std::to_string(y));
      if (y > x) continue;
      auto lhs = h.values[x] + h.values[y];
      auto rhs = h.values[x | y] + h.values[x & y];
      if (less(lhs, rhs)) return fail("not submodular at " + std::to_string(x) + "," + std::to_string(y));
    }
  }
  return true;
}

}  // namespace

bool check_polymatroid(const SetFunction& h, std::string* why) {
  if (h.n > kMaxLpVars) throw InvalidArgument("polymatroid check supports at most 8 variables");
  return check_poly_impl(h, [](const Rational& a, const Rational& b) { return a < b; }, why);
}

bool check_polymatroid(const SetFunctionD& h, double tol, std::string* why) {
  if (h.n > kMaxLpVars) throw InvalidArgument("polymatroid check supports at most 8 variables");
  return check_poly_impl(h, [tol](double a, double b) { return a < b - tol; }, why);
}

SetFunction random_polymatroid(int n, std::mt19937_64& rng) {
  SetFunction h = SetFunction::zero(n);
  const std::uint32_t full = 1u << n;
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_int_distribution<int> weight(1, 4);
  int parts = 1 + pick(rng);
  for (int p = 0; p < parts; ++p) {
    Rational w(weight(rng), 1 + (pick(rng) == 0));
    w.canonicalize();
    std::vector<Rational> f(full);
    switch (pick(rng)) {
      case 0: {
        std::vector<int> m(n);
        for (auto& x : m) x = pick(rng);
        for (std::uint32_t s = 0; s < full; ++s)
          for (int v : VarSet(s).members()) f[s] += m[v];
        break;
      }
      case 1: {
        std::uint32_t ground = std::uniform_int_distribution<std::uint32_t>(1, full - 1)(rng);
        int k = 1 + pick(rng) % std::max(1, n);
        for (std::uint32_t s = 0; s < full; ++s) f[s] = std::min(VarSet(s & ground).size(), k);
        break;
      }
      case 2: {
        int d = 1 + pick(rng);
        std::vector<std::uint32_t> vec(n);
        for (auto& v : vec) v = std::uniform_int_distribution<std::uint32_t>(0, (1u << d) - 1)(rng);
        for (std::uint32_t s = 0; s < full; ++s) {
          std::vector<std::uint32_t> basis;
          for (int v : VarSet(s).members()) {
            std::uint32_t x = vec[v];
            for (auto b : basis) x = std::min(x, x ^ b);
            if (x) {
              basis.push_back(x);
              std::sort(basis.rbegin(), basis.rend());
            }
          }
          f[s] = static_cast<long>(basis.size());
        }
        break;
      }
      default: {
        std::vector<std::uint32_t> cover(n);
        for (auto& c : cover) c = std::uniform_int_distribution<std::uint32_t>(0, 63)(rng);
        for (std::uint32_t s = 0; s < full; ++s) {
          std::uint32_t u = 0;
          for (int v : VarSet(s).members()) u |= cover[v];
          f[s] = std::popcount(u);
        }
        break;
      }
    }
    for (std::uint32_t s = 0; s < full; ++s) h.values[s] += w * f[s];
  }
  return h;
}

SetFunctionD random_entropic(int n, std::mt19937_64& rng) {
  SetFunctionD h;
  h.n = n;
  const std::uint32_t full = 1u << n;
  h.values.assign(full, 0.0);
  std::vector<int> dom(n);
  for (auto& d : dom) d = std::uniform_int_distribution<int>(1, 4)(rng);
  int k = std::uniform_int_distribution<int>(1, 12)(rng);
  std::vector<std::vector<int>> pts(k, std::vector<int>(n));
  std::vector<double> p(k);
  double total = 0;
  for (int i = 0; i < k; ++i) {
    for (int v = 0; v < n; ++v) pts[i][v] = std::uniform_int_distribution<int>(0, dom[v] - 1)(rng);
    p[i] = std::uniform_int_distribution<int>(1, 10)(rng);
    total += p[i];
  }
  for (auto& x : p) x /= total;
  for (std::uint32_t s = 1; s < full; ++s) {
    std::map<std::vector<int>, double> marg;
    auto vars = VarSet(s).members();
    for (int i = 0; i < k; ++i) {
      std::vector<int> key;
      for (int v : vars) key.push_back(pts[i][v]);
      marg[key] += p[i];
    }
    double e = 0;
    for (const auto& [_, q] : marg) e -= q * std::log2(q);
    h.values[s] = std::max(0.0, e);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Conditional vectors and witnesses

void ConditionalVector::add(VarSet x, VarSet y, const Rational& c) {
  if (!x.proper_subset_of(y)) throw InvalidArgument("conditional coordinate needs X strictly inside Y");
  if (sgn(c) == 0) return;
  auto& v = coeffs_[{x.bits(), y.bits()}];
  v += c;
  if (sgn(v) == 0) coeffs_.erase({x.bits(), y.bits()});
}

Rational ConditionalVector::get(VarSet x, VarSet y) const {
  auto it = coeffs_.find({x.bits(), y.bits()});
  return it == coeffs_.end() ? Rational(0) : it->second;
}

void ConditionalVector::set(VarSet x, VarSet y, const Rational& c) {
  if (!x.proper_subset_of(y)) throw InvalidArgument("conditional coordinate needs X strictly inside Y");
  if (sgn(c) == 0)
    coeffs_.erase({x.bits(), y.bits()});
  else
    coeffs_[{x.bits(), y.bits()}] = c;
}

Rational ConditionalVector::norm1() const {
  Rational s = 0;
  for (const auto& [_, c] : coeffs_) s += abs(c);
  return s;
}

ConditionalVector ConditionalVector::scaled(const Rational& k) const {
  ConditionalVector r;
  if (sgn(k) == 0) return r;
  for (const auto& [key, c] : coeffs_) r.coeffs_[key] = c * k;
  return r;
}

ConditionalVector ConditionalVector::operator+(const ConditionalVector& o) const {
  ConditionalVector r = *this;
  for (const auto& [key, c] : o.coeffs_) r.add(VarSet(key.first), VarSet(key.second), c);
  return r;
}

bool ConditionalVector::nonnegative() const {
  for (const auto& [_, c] : coeffs_)
    if (sgn(c) < 0) return false;
  return true;
}

Rational ConditionalVector::eval(const SetFunction& h) const {
  Rational s = 0;
  for (const auto& [key, c] : coeffs_) s += c * (h.values[key.second] - h.values[key.first]);
  return s;
}

double ConditionalVector::eval(const SetFunctionD& h) const {
  double s = 0;
  for (const auto& [key, c] : coeffs_) s += c.get_d() * (h.values[key.second] - h.values[key.first]);
  return s;
}

std::map<std::uint32_t, Rational> ConditionalVector::inflow() const {
  std::map<std::uint32_t, Rational> f;
  for (const auto& [key, c] : coeffs_) {
    f[key.second] += c;
    if (key.first) f[key.first] -= c;
  }
  return f;
}

Witness Witness::scaled(const Rational& k) const {
  Witness w;
  for (const auto& [key, c] : sigma) w.sigma[key] = c * k;
  for (const auto& [key, c] : mu) w.mu[key] = c * k;
  return w;
}

std::map<std::uint32_t, Rational> Witness::inflow() const {
  std::map<std::uint32_t, Rational> f;
  for (const auto& [key, c] : sigma) {
    auto [i, j] = key;
    if (i & j) f[i & j] += c;
    f[i | j] += c;
    f[i] -= c;
    f[j] -= c;
  }
  for (const auto& [key, c] : mu) {
    f[key.first] += c;
    f[key.second] -= c;
  }
  return f;
}

bool check_witness(const ShannonFlow& f, std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  if (!f.delta.nonnegative() || !f.lambda.nonnegative()) return fail("negative coefficient");
  for (const auto& [key, c] : f.lambda.coeffs())
    if (key.first != 0) return fail("target coordinate is conditional");
  for (const auto& [key, c] : f.witness.sigma) {
    VarSet i(key.first), j(key.second);
    if (sgn(c) < 0) return fail("negative sigma");
    if (i.subset_of(j) || j.subset_of(i)) return fail("sigma on comparable sets");
  }
  for (const auto& [key, c] : f.witness.mu) {
    if (sgn(c) < 0) return fail("negative mu");
    if (!VarSet(key.first).proper_subset_of(VarSet(key.second))) return fail("mu on non-nested sets");
  }
  auto flow = f.delta.inflow();
  for (const auto& [z, c] : f.witness.inflow()) flow[z] += c;
  const std::uint32_t full = 1u << f.n;
  for (std::uint32_t z = 1; z < full; ++z) {
    Rational need = f.lambda.get(VarSet(), VarSet(z));
    auto it = flow.find(z);
    Rational have = it == flow.end() ? Rational(0) : it->second;
    if (have < need) return fail("inflow at " + std::to_string(z) + " is " + to_string(have) + " < " + to_string(need));
  }
  for (const auto& [z, c] : flow)
    if (z >= full) return fail("coordinate outside [n]");
  return true;
}

ConditionalVector JointInequality::g_s() const {
  ConditionalVector g = delta_s;
  for (const auto& t : gamma) {
    g.add(VarSet(), t.sc.x, t.gamma_xy);
    g.add(t.sc.x, t.sc.y, t.gamma_yx);
  }
  return g;
}

ConditionalVector JointInequality::g_t() const {
  ConditionalVector g = delta_t;
  for (const auto& t : gamma) {
    g.add(t.sc.x, t.sc.y, t.gamma_xy);
    g.add(VarSet(), t.sc.x, t.gamma_yx);
  }
  return g;
}

ShannonFlow JointInequality::s_side() const { return {n, g_s(), theta, witness_s}; }
ShannonFlow JointInequality::t_side() const { return {n, g_t(), lambda, witness_t}; }

bool check_joint_witness(const JointInequality& ineq, std::string* why) {
  std::string w;
  if (!check_witness(ineq.s_side(), &w)) {
    if (why) *why = "S side: " + w;
    return false;
  }
  if (!check_witness(ineq.t_side(), &w)) {
    if (why) *why = "T side: " + w;
    return false;
  }
  return true;
}

namespace {

std::string describe(const std::vector<Rational>& v) {
  std::string s;
  for (std::size_t i = 1; i < v.size(); ++i) s += (i > 1 ? " " : "") + to_string(v[i]);
  return s;
}

std::string describe(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 1; i < v.size(); ++i) os << (i > 1 ? " " : "") << v[i];
  return os.str();
}

// Trial kinds: 0 exact/exact, 1 entropic/entropic, 2 exact/entropic, 3 entropic/exact.
template <class Eval>
VerifyReport run_trials(int n, int trials, std::uint64_t seed, Eval eval) {
  VerifyReport rep;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t) {
    ++rep.trials;
    int kind = t % 4;
    SetFunction es = random_polymatroid(n, rng), et = random_polymatroid(n, rng);
    SetFunctionD ds = random_entropic(n, rng), dt = random_entropic(n, rng);
    if (kind == 0) {
      if (!eval(es, et)) {
        rep.ok = false;
        rep.counterexample = "hS = [" + describe(es.values) + "], hT = [" + describe(et.values) + "]";
        return rep;
      }
      continue;
    }
    SetFunctionD s = ds, tt = dt;
    if (kind == 2) {
      s.values.clear();
      for (const auto& v : es.values) s.values.push_back(v.get_d());
    }
    if (kind == 3) {
      tt.values.clear();
      for (const auto& v : et.values) tt.values.push_back(v.get_d());
    }
    if (!eval(s, tt)) {
      rep.ok = false;
      rep.counterexample = "hS = [" + describe(s.values) + "], hT = [" + describe(tt.values) + "]";
      return rep;
    }
  }
  return rep;
}

}  // namespace

VerifyReport verify_joint_inequality(const JointInequality& ineq, int trials, std::uint64_t seed) {
  if (ineq.n > kMaxLpVars) throw InvalidArgument("verification supports at most 8 variables");
  const auto gs = ineq.g_s(), gt = ineq.g_t();
  struct Ev {
    const ConditionalVector &gs, &gt, &th, &la;
    bool operator()(const SetFunction& s, const SetFunction& t) const {
      return gs.eval(s) + gt.eval(t) >= th.eval(s) + la.eval(t);
    }
    bool operator()(const SetFunctionD& s, const SetFunctionD& t) const {
      double l = gs.eval(s) + gt.eval(t), r = th.eval(s) + la.eval(t);
      return l >= r - 1e-9 * (1 + std::fabs(l) + std::fabs(r));
    }
  };
  return run_trials(ineq.n, trials, seed, Ev{gs, gt, ineq.theta, ineq.lambda});
}

VerifyReport verify_shannon_flow(const ShannonFlow& f, int trials, std::uint64_t seed) {
  if (f.n > kMaxLpVars) throw InvalidArgument("verification supports at most 8 variables");
  struct Ev {
    const ConditionalVector &d, &la;
    bool operator()(const SetFunction& s, const SetFunction&) const { return d.eval(s) >= la.eval(s); }
    bool operator()(const SetFunctionD& s, const SetFunctionD&) const {
      double l = d.eval(s), r = la.eval(s);
      return l >= r - 1e-9 * (1 + std::fabs(l) + std::fabs(r));
    }
  };
  return run_trials(f.n, trials, seed, Ev{f.delta, f.lambda});
}

// ---------------------------------------------------------------------------
// LP construction

LpContext LpContext::from_query(const Cqap& q, const BoundAssignment& a) {
  if (q.n() > kMaxLpVars) throw InvalidArgument("the LP supports at most 8 variables");
  LpContext ctx;
  ctx.n = q.n();
  ctx.assignment = a;
  ctx.dc = best_constraints(q.dc, a);
  auto all = q.dc;
  all.insert(all.end(), q.ac.begin(), q.ac.end());
  ctx.dc_ac = best_constraints(all, a);
  ctx.sc = span_split_constraints(q.dc, a);
  return ctx;
}

namespace {

enum class RowKind { DcS, DcT, SubS, SubT, MonS, MonT, SplitXY, SplitYX, Lambda, Theta };

struct RowInfo {
  RowKind kind;
  VarSet a;
  VarSet b;
  int index = -1;  // split constraint index
  SymbolicBound bound;
};

// Columns: hS(Z) then hT(Z) for nonempty Z, then the extra columns.
class LpBuilder {
 public:
  LpBuilder(const LpContext& ctx, const BoundAssignment& a, bool two_sided, int extra)
      : ctx_(ctx), a_(a), k_((1 << ctx.n) - 1), two_(two_sided) {
    lp.num_vars = (two_sided ? 2 * k_ : k_) + extra;
    lp.objective.assign(lp.num_vars, Rational(0));
  }

  int hs(VarSet z) const { return z.empty() ? -1 : static_cast<int>(z.bits()) - 1; }
  int ht(VarSet z) const { return z.empty() ? -1 : k_ + static_cast<int>(z.bits()) - 1; }
  int extra(int i) const { return (two_ ? 2 * k_ : k_) + i; }

  void row(std::vector<std::pair<int, Rational>> terms, const Rational& rhs, RowInfo info) {
    std::map<int, Rational> merged;
    for (auto& [j, c] : terms)
      if (j >= 0) merged[j] += c;
    std::vector<std::pair<int, Rational>> coeffs;
    for (auto& [j, c] : merged)
      if (sgn(c) != 0) coeffs.emplace_back(j, c);
    lp.add_row(std::move(coeffs), rhs);
    info_.push_back(std::move(info));
  }

  void side_rows(bool s_side) {
    auto h = [&](VarSet z) { return s_side ? hs(z) : ht(z); };
    const auto& dcs = s_side ? ctx_.dc : ctx_.dc_ac;
    for (const auto& c : dcs)
      row({{h(c.y), 1}, {h(c.x), -1}}, c.bound.log_value(a_), {s_side ? RowKind::DcS : RowKind::DcT, c.x, c.y, -1, c.bound});
    const int n = ctx_.n;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        VarSet rest = VarSet::full(n) - VarSet{i, j};
        for_each_subset(rest, [&](VarSet k) {
          VarSet ki = k | VarSet::single(i), kj = k | VarSet::single(j);
          row({{h(ki | kj), 1}, {h(k), 1}, {h(ki), -1}, {h(kj), -1}}, 0,
              {s_side ? RowKind::SubS : RowKind::SubT, ki, kj, -1, {}});
        });
      }
    VarSet full = VarSet::full(n);
    for (int i = 0; i < n && n > 1; ++i) {
      VarSet x = full - VarSet::single(i);
      row({{h(x), 1}, {h(full), -1}}, 0, {s_side ? RowKind::MonS : RowKind::MonT, x, full, -1, {}});
    }
  }

  void split_rows() {
    for (std::size_t i = 0; i < ctx_.sc.size(); ++i) {
      const auto& c = ctx_.sc[i];
      Rational nz = c.bound.log_value(a_);
      row({{hs(c.x), 1}, {ht(c.y), 1}, {ht(c.x), -1}}, nz, {RowKind::SplitXY, c.x, c.y, static_cast<int>(i), c.bound});
      row({{hs(c.y), 1}, {hs(c.x), -1}, {ht(c.x), 1}}, nz, {RowKind::SplitYX, c.x, c.y, static_cast<int>(i), c.bound});
    }
  }

  void all_base_rows() {
    side_rows(true);
    side_rows(false);
    split_rows();
  }

  const std::vector<RowInfo>& info() const { return info_; }

  JointInequality extract(const LpResult& r) const {
    JointInequality q;
    q.n = ctx_.n;
    std::map<int, SplitTerm> splits;
    for (std::size_t i = 0; i < info_.size(); ++i) {
      const Rational& y = r.y[i];
      if (sgn(y) == 0) continue;
      const auto& in = info_[i];
      switch (in.kind) {
        case RowKind::DcS:
          q.delta_s.add(in.a, in.b, y);
          q.rhs *= in.bound.pow(y);
          break;
        case RowKind::DcT:
          q.delta_t.add(in.a, in.b, y);
          q.rhs *= in.bound.pow(y);
          break;
        case RowKind::SubS: q.witness_s.sigma[{in.a.bits(), in.b.bits()}] += y; break;
        case RowKind::SubT: q.witness_t.sigma[{in.a.bits(), in.b.bits()}] += y; break;
        case RowKind::MonS: q.witness_s.mu[{in.a.bits(), in.b.bits()}] += y; break;
        case RowKind::MonT: q.witness_t.mu[{in.a.bits(), in.b.bits()}] += y; break;
        case RowKind::SplitXY:
        case RowKind::SplitYX: {
          auto& t = splits[in.index];
          t.sc = ctx_.sc[in.index];
          (in.kind == RowKind::SplitXY ? t.gamma_xy : t.gamma_yx) += y;
          q.rhs *= in.bound.pow(y);
          break;
        }
        case RowKind::Lambda: q.lambda.add(VarSet(), in.b, y); break;
        case RowKind::Theta: q.theta.add(VarSet(), in.b, y); break;
      }
    }
    for (auto& [_, t] : splits) q.gamma.push_back(std::move(t));
    return q;
  }

  SetFunction primal(const LpResult& r, bool s_side) const {
    SetFunction h = SetFunction::zero(ctx_.n);
    for (std::uint32_t z = 1; z <= static_cast<std::uint32_t>(k_); ++z)
      h.values[z] = r.x[s_side ? hs(VarSet(z)) : ht(VarSet(z))];
    return h;
  }

  LinearProgram lp;

 private:
  const LpContext& ctx_;
  const BoundAssignment& a_;
  int k_;
  bool two_;
  std::vector<RowInfo> info_;
};

void check_rule(const LpContext& ctx, const TwoPhaseRule& rule) {
  if (ctx.n > kMaxLpVars) throw InvalidArgument("the LP supports at most 8 variables");
  for (const auto& t : rule.s_targets)
    if (t.schema.empty() || !t.schema.subset_of(VarSet::full(ctx.n))) throw InvalidArgument("bad S-target schema");
  for (const auto& t : rule.t_targets)
    if (t.schema.empty() || !t.schema.subset_of(VarSet::full(ctx.n))) throw InvalidArgument("bad T-target schema");
}

}  // namespace

Rational polymatroid_bound(const LpContext& ctx, const std::vector<VarSet>& targets) {
  if (targets.empty()) throw InvalidArgument("polymatroid bound of an empty disjunction");
  LpBuilder b(ctx, ctx.assignment, false, 1);
  b.side_rows(true);
  const int w = b.extra(0);
  for (auto t : targets) b.row({{w, 1}, {b.hs(t), -1}}, 0, {RowKind::Lambda, {}, t, -1, {}});
  b.lp.objective[w] = 1;
  LpResult r = solve_lp(b.lp);
  if (r.status == LpStatus::Unbounded) throw ValidationError("polymatroid bound is unbounded; some variable lacks a constraint");
  if (r.status != LpStatus::Optimal) throw ValidationError("polymatroid bound LP infeasible");
  return r.value;
}

JointSolution solve_joint_lp(const LpContext& ctx, const TwoPhaseRule& rule, const Rational& log_s, LpMethod method) {
  check_rule(ctx, rule);
  JointSolution sol;
  if (!rule.s_targets.empty()) {
    sol.s_max = polymatroid_bound(ctx, rule.s_schemas());
    if (log_s >= *sol.s_max) {
      sol.status = ObjStatus::MaterializeAll;
      return sol;
    }
  }
  LpBuilder b(ctx, ctx.assignment, true, 1);
  b.all_base_rows();
  const int w = b.extra(0);
  for (const auto& t : rule.t_targets) b.row({{w, 1}, {b.ht(t.schema), -1}}, 0, {RowKind::Lambda, {}, t.schema, -1, {}});
  for (const auto& t : rule.s_targets) b.row({{b.hs(t.schema), -1}}, -log_s, {RowKind::Theta, {}, t.schema, -1, {}});
  b.lp.objective[w] = 1;
  LpResult r = solve_lp(b.lp, method);
  sol.pivots = r.pivots;
  if (r.status == LpStatus::Unbounded) {
    sol.status = ObjStatus::Unbounded;
    return sol;
  }
  if (r.status != LpStatus::Optimal) throw ValidationError("joint LP infeasible below the polymatroid bound");
  sol.obj = r.value;
  sol.h_s = b.primal(r, true);
  sol.h_t = b.primal(r, false);
  sol.ineq = b.extract(r);
  return sol;
}

Rational weighted_lp_value(const LpContext& ctx, const TwoPhaseRule& rule, const std::map<VarSet, Rational>& lambda,
                           const std::map<VarSet, Rational>& theta, const Rational& log_s) {
  check_rule(ctx, rule);
  LpBuilder b(ctx, ctx.assignment, true, 0);
  b.all_base_rows();
  Rational norm = 0;
  for (const auto& [z, c] : lambda) b.lp.objective[b.ht(z)] += c;
  for (const auto& [z, c] : theta) {
    b.lp.objective[b.hs(z)] += c;
    norm += c;
  }
  LpResult r = solve_lp(b.lp);
  if (r.status != LpStatus::Optimal) throw ValidationError("weighted LP not bounded");
  return r.value - log_s * norm;
}

// ---------------------------------------------------------------------------
// Tradeoff terms

Rational TradeoffTerm::log_time(const Rational& log_s, const BoundAssignment& a) const {
  if (sgn(time_exp) <= 0) throw InvalidArgument("term has no time component");
  return (rhs.log_value(a) - space_exp * log_s) / time_exp;
}

TradeoffTerm TradeoffTerm::normalized() const {
  if (sgn(time_exp) <= 0) return *this;
  TradeoffTerm t = *this;
  Rational inv = 1 / time_exp;
  t.space_exp = space_exp * inv;
  t.time_exp = 1;
  t.rhs = rhs.pow(inv);
  return t;
}

bool TradeoffTerm::same_line(const TradeoffTerm& o) const {
  auto a = normalized(), b = o.normalized();
  return a.space_exp == b.space_exp && a.time_exp == b.time_exp && a.rhs == b.rhs;
}

std::string TradeoffTerm::to_string() const {
  std::vector<Rational> all{space_exp, time_exp};
  for (const auto& [_, e] : rhs.exponents()) all.push_back(e);
  Rational k = lcm_of_denominators(all);
  mpz_class g = 0;
  for (const auto& v : all) {
    Rational s = v * k;
    mpz_class num = abs(s.get_num());
    mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), num.get_mpz_t());
  }
  if (g > 1) k /= Rational(g);
  auto part = [](const std::string& name, const Rational& e) -> std::string {
    if (sgn(e) == 0) return "";
    if (e == 1) return name;
    return name + "^" + cqap::to_string(e);
  };
  std::string lhs = part("S", space_exp * k);
  std::string tp = part("T", time_exp * k);
  if (!tp.empty()) lhs += (lhs.empty() ? "" : "*") + tp;
  if (lhs.empty()) lhs = "1";
  return lhs + " ~= " + rhs.pow(k).to_string();
}

TradeoffTerm parse_term(const std::string& text) {
  std::string t = text;
  std::string sep = "~=";
  auto pos = t.find(sep);
  if (pos == std::string::npos) {
    sep = "≅";
    pos = t.find(sep);
  }
  if (pos == std::string::npos) throw InvalidArgument("term needs '~=': " + text);
  SymbolicBound lhs = SymbolicBound::parse(t.substr(0, pos));
  TradeoffTerm term;
  term.space_exp = lhs.exponent("S");
  term.time_exp = lhs.exponent("T");
  for (const auto& [k, _] : lhs.exponents())
    if (k != "S" && k != "T") throw InvalidArgument("term left side may only use S and T: " + text);
  term.rhs = SymbolicBound::parse(t.substr(pos + sep.size()));
  term.origin = "catalog";
  return term;
}

TradeoffTerm bfs_term() {
  TradeoffTerm t;
  t.space_exp = 0;
  t.time_exp = 1;
  t.rhs = SymbolicBound::base("N") * SymbolicBound::base("Q");
  t.origin = "bfs";
  return t;
}

namespace {

TradeoffTerm term_of(const JointInequality& q) {
  TradeoffTerm t;
  t.space_exp = q.theta_norm();
  t.time_exp = q.lambda_norm();
  t.rhs = q.rhs;
  t.origin = "lp";
  t.ineq = q;
  return t;
}

struct Line {
  Rational c;      // dual objective at logS = 0
  Rational slope;  // |theta|
  JointInequality ineq;
};

}  // namespace

RuleTradeoff sweep_rule(const LpContext& ctx, const TwoPhaseRule& rule, LpMethod method) {
  check_rule(ctx, rule);
  RuleTradeoff out;
  // Solves with a non-strict S constraint so the upper end s_max is included.
  auto eval = [&](const Rational& s, Line& line) {
    LpBuilder b(ctx, ctx.assignment, true, 1);
    b.all_base_rows();
    const int w = b.extra(0);
    for (const auto& t : rule.t_targets) b.row({{w, 1}, {b.ht(t.schema), -1}}, 0, {RowKind::Lambda, {}, t.schema, -1, {}});
    for (const auto& t : rule.s_targets) b.row({{b.hs(t.schema), -1}}, -s, {RowKind::Theta, {}, t.schema, -1, {}});
    b.lp.objective[w] = 1;
    LpResult r = solve_lp(b.lp, method);
    if (r.status == LpStatus::Unbounded) return false;
    if (r.status != LpStatus::Optimal) throw ValidationError("joint LP infeasible inside the sweep range");
    line.ineq = b.extract(r);
    line.slope = line.ineq.theta_norm();
    line.c = r.value + line.slope * s;
    return true;
  };
  std::vector<Line> found;
  auto record = [&](const Line& l) {
    for (const auto& f : found)
      if (f.c == l.c && f.slope == l.slope) return;
    found.push_back(l);
  };
  Rational hi = 0;
  if (!rule.s_targets.empty()) {
    out.s_max = polymatroid_bound(ctx, rule.s_schemas());
    hi = *out.s_max;
  }
  Line l0, l1;
  if (!eval(Rational(0), l0)) {
    out.unbounded = true;
    return out;
  }
  record(l0);
  if (hi > 0) {
    if (!eval(hi, l1)) throw ValidationError("joint LP unbounded at the polymatroid bound");
    record(l1);
    std::function<void(const Rational&, const Line&, const Rational&, const Line&, int)> rec =
        [&](const Rational& s0, const Line& a, const Rational& s1, const Line& b, int depth) {
          if (depth > 64 || a.slope == b.slope) return;
          Rational x = (b.c - a.c) / (b.slope - a.slope);
          if (x <= s0 || x >= s1) return;
          Line m;
          if (!eval(x, m)) return;
          if (m.c - m.slope * x >= a.c - a.slope * x) return;
          record(m);
          rec(s0, a, x, m, depth + 1);
          rec(x, m, s1, b, depth + 1);
        };
    rec(Rational(0), l0, hi, l1, 0);
  }
  std::sort(found.begin(), found.end(), [](const Line& a, const Line& b) { return a.slope < b.slope; });
  for (const auto& l : found) out.terms.push_back(term_of(l.ineq));
  return out;
}

std::optional<JointInequality> certify_term(const LpContext& ctx, const TwoPhaseRule& rule, const TradeoffTerm& term) {
  check_rule(ctx, rule);
  if (sgn(term.time_exp) <= 0) return std::nullopt;
  TradeoffTerm goal = term.normalized();
  const Rational weights[] = {Rational(1, 1024), Rational(1), Rational(1024)};
  for (const auto& wq : weights) {
    BoundAssignment a = ctx.assignment;
    a.log_values["N"] = 1;
    a.log_values["Q"] = wq;
    LpBuilder b(ctx, a, true, 2);
    b.all_base_rows();
    const int w = b.extra(0), t = b.extra(1);
    for (const auto& x : rule.t_targets) b.row({{w, 1}, {b.ht(x.schema), -1}}, 0, {RowKind::Lambda, {}, x.schema, -1, {}});
    for (const auto& x : rule.s_targets) b.row({{t, 1}, {b.hs(x.schema), -1}}, 0, {RowKind::Theta, {}, x.schema, -1, {}});
    b.lp.objective[w] = 1;
    b.lp.objective[t] = goal.space_exp;
    LpResult r = solve_lp(b.lp);
    if (r.status != LpStatus::Optimal) continue;
    JointInequality q = b.extract(r);
    Rational lam = q.lambda_norm();
    if (sgn(lam) <= 0) continue;
    if (q.theta_norm() / lam < goal.space_exp) continue;
    SymbolicBound got = q.rhs.pow(1 / lam);
    bool ok = true;
    std::set<std::string> bases;
    for (const auto& [k, _] : got.exponents()) bases.insert(k);
    for (const auto& [k, _] : goal.rhs.exponents()) bases.insert(k);
    for (const auto& k : bases) ok = ok && got.exponent(k) <= goal.rhs.exponent(k);
    if (ok) return q;
  }
  return std::nullopt;
}

Rational slack(const Cqap& q, const std::vector<Rational>& u, VarSet a, VarSet within) {
  if (u.size() != q.atoms.size()) throw InvalidArgument("edge cover needs one weight per atom");
  Rational best = -1;
  for (int i : within.members()) {
    Rational s = 0;
    for (std::size_t f = 0; f < q.atoms.size(); ++f)
      if (q.atoms[f].varset.contains(i)) s += u[f];
    if (s < 1) throw InvalidArgument("weights do not cover variable " + q.var_names[i]);
    if (!a.contains(i) && (best < 0 || s < best)) best = s;
  }
  return best;  // -1 when every variable is in a
}

namespace {

SymbolicBound atom_size(const Cqap& q, std::size_t f) {
  const DegreeConstraint* best = nullptr;
  BoundAssignment std_a = BoundAssignment::standard();
  for (const auto& c : q.dc)
    if (c.atom == static_cast<int>(f) && c.x.empty() && c.y == q.atoms[f].varset)
      if (!best || c.bound.log_value(std_a) < best->bound.log_value(std_a)) best = &c;
  if (!best) throw InvalidArgument("atom " + q.atoms[f].relation + " has no cardinality constraint");
  return best->bound;
}

TwoPhaseRule make_rule(std::vector<VarSet> s, std::vector<VarSet> t) {
  TwoPhaseRule r;
  std::sort(s.begin(), s.end(), varset_less);
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::sort(t.begin(), t.end(), varset_less);
  t.erase(std::unique(t.begin(), t.end()), t.end());
  for (auto x : s)
    if (!x.empty()) r.s_targets.push_back({x, {}});
  for (auto x : t)
    if (!x.empty()) r.t_targets.push_back({x, {}});
  return r;
}

}  // namespace

CoverTradeoff tradeoff_from_edge_cover(const Cqap& q, const std::vector<Rational>& u) {
  for (const auto& x : u)
    if (sgn(x) < 0) throw InvalidArgument("edge cover weights must be nonnegative");
  CoverTradeoff out;
  Rational alpha = slack(q, u, q.access, q.all_vars());
  SymbolicBound prod;
  for (std::size_t f = 0; f < q.atoms.size(); ++f)
    if (sgn(u[f]) > 0) prod *= atom_size(q, f).pow(u[f]);
  out.rule = make_rule({q.access}, {q.all_vars()});
  if (alpha < 0) {
    out.degenerate = true;
    out.alpha = 0;
    out.term.space_exp = 1;
    out.term.time_exp = 0;
    out.term.rhs = prod;
    out.term.origin = "materialize";
    return out;
  }
  out.alpha = alpha;
  out.term.space_exp = 1;
  out.term.time_exp = alpha;
  out.term.rhs = SymbolicBound::base("Q", alpha) * prod;
  out.term.origin = "edge-cover";
  if (q.n() <= kMaxLpVars && !q.access.empty()) {
    LpContext ctx = LpContext::from_query(q, BoundAssignment::standard());
    out.term.ineq = certify_term(ctx, out.rule, out.term);
  }
  return out;
}

PathTradeoff tradeoff_from_path(const Cqap& q, const TreeDecomp& d, const std::vector<std::vector<Rational>>& covers,
                                const std::vector<int>& path) {
  if (path.empty() || path.front() != d.root) throw InvalidArgument("path must start at the root");
  if (static_cast<int>(covers.size()) != d.size()) throw InvalidArgument("one edge cover per node is required");
  for (std::size_t i = 1; i < path.size(); ++i)
    if (path[i] < 0 || path[i] >= d.size() || d.parent[path[i]] != path[i - 1])
      throw InvalidArgument("path is not a root-to-node path");
  PathTradeoff out;
  Rational space = 0;
  SymbolicBound prod;
  std::vector<VarSet> s_targets;
  for (std::size_t j = 0; j < path.size(); ++j) {
    int t = path[j];
    VarSet bag = d.bags[t];
    VarSet aj = j == 0 ? q.access : (bag & d.bags[path[j - 1]]);
    s_targets.push_back(aj);
    Rational alpha = slack(q, covers[t], aj, bag);
    out.alphas.push_back(alpha);
    if (alpha < 0) continue;
    space += 1 / alpha;
    for (std::size_t f = 0; f < q.atoms.size(); ++f)
      if (sgn(covers[t][f]) > 0) prod *= atom_size(q, f).pow(covers[t][f] / alpha);
  }
  out.rule = make_rule(s_targets, {d.bags[path.back()]});
  out.term.space_exp = space;
  out.term.time_exp = 1;
  out.term.rhs = SymbolicBound::base("Q") * prod;
  out.term.origin = "path";
  if (q.n() <= kMaxLpVars) {
    LpContext ctx = LpContext::from_query(q, BoundAssignment::standard());
    out.term.ineq = certify_term(ctx, out.rule, out.term);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Envelope

Rational TradeoffCurve::at(const Rational& log_s) const {
  if (points.empty()) throw InvalidArgument("empty curve");
  if (log_s <= points.front().first) return points.front().second;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& [x0, y0] = points[i - 1];
    const auto& [x1, y1] = points[i];
    if (log_s <= x1) return y0 + (y1 - y0) * (log_s - x0) / (x1 - x0);
  }
  return points.back().second;
}

std::string TradeoffCurve::to_csv() const {
  std::string s = "logS,logT\n";
  for (const auto& [x, y] : points) s += to_string(x) + "," + to_string(y) + "\n";
  return s;
}

TradeoffCurve envelope(const std::vector<std::vector<TradeoffTerm>>& rule_terms, const BoundAssignment& a) {
  struct L {
    Rational c, m;  // logT = c - m * logS
  };
  std::vector<std::vector<L>> rules;
  std::vector<L> all;
  for (const auto& terms : rule_terms) {
    std::vector<L> ls;
    for (const auto& t : terms) {
      if (sgn(t.time_exp) <= 0) continue;
      ls.push_back({t.rhs.log_value(a) / t.time_exp, t.space_exp / t.time_exp});
    }
    if (ls.empty()) throw InvalidArgument("every rule needs a term with a time component");
    all.insert(all.end(), ls.begin(), ls.end());
    rules.push_back(std::move(ls));
  }
  auto value = [&](const Rational& s) {
    Rational best = 0;
    for (const auto& ls : rules) {
      Rational m = ls[0].c - ls[0].m * s;
      for (const auto& l : ls) m = std::min(m, Rational(l.c - l.m * s));
      best = std::max(best, m);
    }
    return best;
  };
  std::set<Rational> xs{Rational(0)};
  for (const auto& l : all)
    if (sgn(l.m) > 0 && l.c > 0) xs.insert(l.c / l.m);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      if (all[i].m == all[j].m) continue;
      Rational x = (all[j].c - all[i].c) / (all[j].m - all[i].m);
      if (x > 0) xs.insert(x);
    }
  Rational end = *xs.rbegin();
  for (auto x : xs)
    if (value(x) == 0) {
      end = x;
      break;
    }
  TradeoffCurve curve;
  for (auto x : xs) {
    if (x > end) break;
    curve.points.emplace_back(x, value(x));
  }
  // Drop interior points on a straight segment.
  std::vector<std::pair<Rational, Rational>> kept;
  for (const auto& p : curve.points) {
    while (kept.size() >= 2) {
      const auto& a0 = kept[kept.size() - 2];
      const auto& a1 = kept.back();
      if ((a1.second - a0.second) * (p.first - a1.first) == (p.second - a1.second) * (a1.first - a0.first))
        kept.pop_back();
      else
        break;
    }
    kept.push_back(p);
  }
  curve.points = std::move(kept);
  return curve;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json names_of(VarSet s, const std::vector<std::string>& names) {
  nlohmann::json a = nlohmann::json::array();
  for (int v : s.members()) a.push_back(v < static_cast<int>(names.size()) ? names[v] : std::to_string(v));
  return a;
}

VarSet set_of(const nlohmann::json& j, const std::vector<std::string>& names) {
  VarSet s;
  for (const auto& x : j) {
    auto name = x.get<std::string>();
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidArgument("unknown variable in JSON: " + name);
    s |= VarSet::single(static_cast<int>(it - names.begin()));
  }
  return s;
}

nlohmann::json witness_to_json(const Witness& w, const std::vector<std::string>& names) {
  nlohmann::json sigma = nlohmann::json::array(), mu = nlohmann::json::array();
  for (const auto& [k, c] : w.sigma)
    sigma.push_back({{"i", names_of(VarSet(k.first), names)}, {"j", names_of(VarSet(k.second), names)}, {"c", to_string(c)}});
  for (const auto& [k, c] : w.mu)
    mu.push_back({{"x", names_of(VarSet(k.first), names)}, {"y", names_of(VarSet(k.second), names)}, {"c", to_string(c)}});
  return {{"sigma", sigma}, {"mu", mu}};
}

}  // namespace

nlohmann::json varset_to_json(VarSet s, const std::vector<std::string>& names) { return names_of(s, names); }
VarSet varset_from_json(const nlohmann::json& j, const std::vector<std::string>& names) { return set_of(j, names); }

nlohmann::json conditional_to_json(const ConditionalVector& v, const std::vector<std::string>& names) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& [k, c] : v.coeffs())
    a.push_back({{"x", names_of(VarSet(k.first), names)}, {"y", names_of(VarSet(k.second), names)}, {"c", to_string(c)}});
  return a;
}

ConditionalVector conditional_from_json(const nlohmann::json& j, const std::vector<std::string>& names) {
  ConditionalVector v;
  for (const auto& e : j) {
    VarSet x = e.contains("x") ? set_of(e.at("x"), names) : VarSet();
    VarSet y = set_of(e.at("y"), names);
    v.add(x, y | x, parse_rational(e.at("c").get<std::string>()));
  }
  return v;
}

nlohmann::json joint_to_json(const JointInequality& q, const std::vector<std::string>& names) {
  nlohmann::json gamma = nlohmann::json::array();
  for (const auto& t : q.gamma)
    gamma.push_back({{"x", names_of(t.sc.x, names)},
                     {"y", names_of(t.sc.y, names)},
                     {"z", names_of(t.sc.z, names)},
                     {"bound", t.sc.bound.to_string()},
                     {"gamma_xy", to_string(t.gamma_xy)},
                     {"gamma_yx", to_string(t.gamma_yx)}});
  return {{"delta_s", conditional_to_json(q.delta_s, names)},
          {"delta_t", conditional_to_json(q.delta_t, names)},
          {"gamma", gamma},
          {"g_s", conditional_to_json(q.g_s(), names)},
          {"g_t", conditional_to_json(q.g_t(), names)},
          {"theta", conditional_to_json(q.theta, names)},
          {"lambda", conditional_to_json(q.lambda, names)},
          {"witness_s", witness_to_json(q.witness_s, names)},
          {"witness_t", witness_to_json(q.witness_t, names)},
          {"rhs", q.rhs.to_string()}};
}

nlohmann::json term_to_json(const TradeoffTerm& t, const std::vector<std::string>& names) {
  nlohmann::json j = {{"term", t.to_string()},
                      {"space_exp", to_string(t.space_exp)},
                      {"time_exp", to_string(t.time_exp)},
                      {"rhs", t.rhs.to_string()},
                      {"origin", t.origin}};
  if (t.ineq) j["inequality"] = joint_to_json(*t.ineq, names);
  return j;
}

}  // namespace cqap
