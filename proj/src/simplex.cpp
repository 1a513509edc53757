#include "cqap/simplex.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <set>

namespace cqap {

int LinearProgram::add_row(std::vector<std::pair<int, Rational>> coeffs, Rational rhs, std::string tag) {
  rows.push_back({std::move(coeffs), std::move(rhs), std::move(tag)});
  return static_cast<int>(rows.size()) - 1;
}

namespace {

struct DoubleOps {
  static constexpr bool kFloating = true;
  static constexpr double kEps = 1e-9;
  static bool neg(double v) { return v < -kEps; }
  static bool pos(double v) { return v > kEps; }
  static bool pivot_ok(double v) { return v > 1e-7; }
  static bool zero(double v) { return std::fabs(v) <= kEps; }
  // a1/b1 < a2/b2 with b1, b2 > 0.
  static bool ratio_less(double a1, double b1, double a2, double b2) { return a1 / b1 < a2 / b2 - kEps; }
  static bool ratio_equal(double a1, double b1, double a2, double b2) { return std::fabs(a1 / b1 - a2 / b2) <= kEps; }
  static double from(const Rational& r) { return r.get_d(); }
};

struct ExactOps {
  static constexpr bool kFloating = false;
  static bool neg(const Rational& v) { return sgn(v) < 0; }
  static bool pos(const Rational& v) { return sgn(v) > 0; }
  static bool pivot_ok(const Rational& v) { return sgn(v) > 0; }
  static bool zero(const Rational& v) { return sgn(v) == 0; }
  static bool ratio_less(const Rational& a1, const Rational& b1, const Rational& a2, const Rational& b2) {
    return a1 * b2 < a2 * b1;
  }
  static bool ratio_equal(const Rational& a1, const Rational& b1, const Rational& a2, const Rational& b2) {
    return a1 * b2 == a2 * b1;
  }
  static Rational from(const Rational& r) { return r; }
};

// Compact tableau: columns are the nonbasic variables plus the phase-one
// artificial (column n) and the right-hand side (column n+1). Rows m and m+1
// hold the objective and the phase-one objective. Variables 0..n-1 are
// structural, n..n+m-1 slack, -1 the artificial.
template <class Num, class Ops>
class Tableau {
 public:
  explicit Tableau(const LinearProgram& lp)
      : m(static_cast<int>(lp.rows.size())), n(lp.num_vars), N(n + 1), B(m), D(m + 2, std::vector<Num>(n + 2)), lp_(&lp) {
    for (int i = 0; i < m; ++i) {
      for (const auto& [j, a] : lp.rows[i].coeffs) D[i][j] += Ops::from(a);
      B[i] = n + i;
      D[i][n] = Num(-1);
      D[i][n + 1] = Ops::from(lp.rows[i].rhs);
    }
    for (int j = 0; j < n; ++j) {
      N[j] = j;
      D[m][j] = -Ops::from(lp.objective[j]);
    }
    N[n] = -1;
    D[m + 1][n] = Num(1);
  }

  void pivot(int r, int s) {
    ++pivots;
    std::vector<int> nz;
    for (int j = 0; j < n + 2; ++j)
      if (!Ops::zero(D[r][j])) nz.push_back(j);
    Num inv = Num(1) / D[r][s];
    for (int i = 0; i < m + 2; ++i) {
      if (i == r || Ops::zero(D[i][s])) continue;
      Num f = D[i][s] * inv;
      for (int j : nz) {
        D[i][j] -= D[r][j] * f;
        if constexpr (Ops::kFloating) {
          if (std::fabs(D[i][j]) < 1e-12) D[i][j] = 0;
        }
      }
      D[i][s] = D[r][s] * f;
    }
    for (int j : nz)
      if (j != s) D[r][j] *= inv;
    for (int i = 0; i < m + 2; ++i)
      if (i != r) D[i][s] *= -inv;
    D[r][s] = inv;
    std::swap(B[r], N[s]);

  }

  // Returns false when unbounded or when the pivot limit is hit.
  // Rebuilds the floating point tableau from the current basis.
  bool refresh() {
    if constexpr (!Ops::kFloating) {
      return true;
    } else {
      const LinearProgram& lp = *lp_;
      std::vector<std::vector<std::pair<int, double>>> cols(n);
      for (int i = 0; i < m; ++i)
        for (const auto& [j, a] : lp.rows[i].coeffs) cols[j].emplace_back(i, a.get_d());
      auto column = [&](int v, auto&& emit) {
        if (v < 0) {
          for (int i = 0; i < m; ++i) emit(i, -1.0);
        } else if (v < n) {
          for (const auto& [i, a] : cols[v]) emit(i, a);
        } else {
          emit(v - n, 1.0);
        }
      };
      std::vector<Eigen::Triplet<double>> trip;
      for (int k = 0; k < m; ++k) column(B[k], [&](int i, double a) { trip.emplace_back(i, k, a); });
      Eigen::SparseMatrix<double> basis(m, m);
      basis.setFromTriplets(trip.begin(), trip.end());
      basis.makeCompressed();
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(basis);
      if (lu.info() != Eigen::Success) return false;
      Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, n + 2);
      for (int j = 0; j < n + 1; ++j) column(N[j], [&](int i, double a) { rhs(i, j) += a; });
      for (int i = 0; i < m; ++i) rhs(i, n + 1) = lp.rows[i].rhs.get_d();
      Eigen::MatrixXd sol = lu.solve(rhs);
      if (lu.info() != Eigen::Success || !sol.allFinite()) return false;
      auto cost = [&](int v, int row) -> double {
        if (row == 0) return v >= 0 && v < n ? lp.objective[v].get_d() : 0.0;
        return v < 0 ? -1.0 : 0.0;
      };
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n + 2; ++j) D[i][j] = std::fabs(sol(i, j)) < 1e-12 ? 0.0 : sol(i, j);
      for (int row = 0; row < 2; ++row) {
        for (int j = 0; j < n + 2; ++j) {
          double v = j < n + 1 ? -cost(N[j], row) : 0.0;
          for (int i = 0; i < m; ++i) v += cost(B[i], row) * D[i][j];
          D[m + row][j] = std::fabs(v) < 1e-12 ? 0.0 : v;
        }
      }
      return true;
    }
  }

  bool simplex(int phase, long pivot_limit) {
    const int x = m + phase - 1;
    bool bland = false;
    for (;;) {
      if (pivot_limit >= 0 && pivots > pivot_limit) {
        limit_hit = true;
        return false;
      }
      if constexpr (Ops::kFloating) {
        if (pivots > 0 && pivots % kRefreshEvery == 0 && !refresh()) {
          limit_hit = true;
          return false;
        }
      }
      int s = -1;
      for (int j = 0; j < n + 1; ++j) {
        if (N[j] == -phase || !Ops::neg(D[x][j])) continue;
        if (s == -1) {
          s = j;
        } else if (bland) {
          if (N[j] < N[s]) s = j;
        } else if (D[x][j] < D[x][s] || (!(D[x][s] < D[x][j]) && N[j] < N[s])) {
          s = j;
        }
      }
      if (s == -1) return true;
      int r = Ops::kFloating ? harris_row(s, bland) : -1;
      if (r == -1) {
        for (int i = 0; i < m; ++i) {
          if (!Ops::pivot_ok(D[i][s])) continue;
          if (r == -1 || Ops::ratio_less(D[i][n + 1], D[i][s], D[r][n + 1], D[r][s]) ||
              (Ops::ratio_equal(D[i][n + 1], D[i][s], D[r][n + 1], D[r][s]) && B[i] < B[r]))
            r = i;
        }
      }
      if (r == -1) return false;
      bland = Ops::zero(D[r][n + 1]);
      pivot(r, s);
    }
  }

  // Two-pass ratio test: among rows within tolerance of the minimum ratio,
  // take the largest pivot element, or under Bland's rule the lowest basic
  // index among elements not much smaller than the largest.
  int harris_row(int s, bool lowest_index) const {
    constexpr double tol = 1e-9, piv_tol = 1e-7;
    double bound = 0;
    bool any = false;
    for (int i = 0; i < m; ++i) {
      double a = to_double(D[i][s]);
      if (a <= piv_tol) continue;
      double q = (std::max(to_double(D[i][n + 1]), 0.0) + tol) / a;
      if (!any || q < bound) bound = q;
      any = true;
    }
    if (!any) return -1;
    int r = -1;
    double best = 0;
    for (int i = 0; i < m; ++i) {
      double a = to_double(D[i][s]);
      if (a <= piv_tol || std::max(to_double(D[i][n + 1]), 0.0) / a > bound) continue;
      if (r == -1 || a > best || (a == best && B[i] < B[r])) {
        r = i;
        best = a;
      }
    }
    if (!lowest_index || r == -1) return r;
    for (int i = 0; i < m; ++i) {
      double a = to_double(D[i][s]);
      if (a < 1e-2 * best || std::max(to_double(D[i][n + 1]), 0.0) / a > bound) continue;
      if (B[i] < B[r]) r = i;
    }
    return r;
  }

  static double to_double(const Num& v) {
    if constexpr (Ops::kFloating) {
      return v;
    } else {
      return v.get_d();
    }
  }

  LpStatus solve(long pivot_limit) {
    int r = 0;
    for (int i = 1; i < m; ++i)
      if (D[i][n + 1] < D[r][n + 1]) r = i;
    if (m > 0 && Ops::neg(D[r][n + 1])) {
      pivot(r, n);
      if (!simplex(2, pivot_limit)) return LpStatus::Infeasible;
      if (Ops::neg(D[m + 1][n + 1])) return LpStatus::Infeasible;
      for (int i = 0; i < m; ++i) {
        if (B[i] != -1) continue;
        int s = -1;
        for (int j = 0; j < n + 1; ++j) {
          if (Ops::zero(D[i][j])) continue;
          if constexpr (Ops::kFloating) {
            if (s == -1 || std::fabs(D[i][j]) > std::fabs(D[i][s])) s = j;
          } else {
            if (s == -1 || N[j] < N[s]) s = j;
          }
        }
        if (s >= 0) pivot(i, s);
      }
    }
    if (!simplex(1, pivot_limit)) return LpStatus::Unbounded;
    return LpStatus::Optimal;
  }

  std::vector<Num> primal() const {
    std::vector<Num> x(n);
    for (int i = 0; i < m; ++i)
      if (B[i] >= 0 && B[i] < n) x[B[i]] = D[i][n + 1];
    return x;
  }

  std::vector<Num> dual() const {
    std::vector<Num> y(m);
    for (int j = 0; j < n + 1; ++j)
      if (N[j] >= n) y[N[j] - n] = D[m][j];
    return y;
  }

  static constexpr int kRefreshEvery = 100;

  int m, n;
  std::vector<int> N, B;
  std::vector<std::vector<Num>> D;
  const LinearProgram* lp_;
  int pivots = 0;
  bool limit_hit = false;
};

using ExactTableau = Tableau<Rational, ExactOps>;
using DoubleTableau = Tableau<double, DoubleOps>;

LpResult finish(ExactTableau& t, LpStatus status) {
  LpResult r;
  r.status = status;
  r.pivots = t.pivots;
  if (status == LpStatus::Optimal) {
    r.value = t.D[t.m][t.n + 1];
    r.x = t.primal();
    r.y = t.dual();
  }
  return r;
}

LpResult solve_exact(const LinearProgram& lp) {
  ExactTableau t(lp);
  LpStatus st = t.solve(-1);
  return finish(t, st);
}

// Pivots the exact tableau into the basis found in floating point.
bool warm_start(ExactTableau& t, const DoubleTableau& f) {
  std::set<int> target(f.B.begin(), f.B.end());
  for (int v = 0; v < t.n; ++v) {
    if (!target.count(v)) continue;
    int s = -1;
    for (int j = 0; j < t.n + 1; ++j)
      if (t.N[j] == v) s = j;
    if (s < 0) continue;
    int r = -1;
    for (int i = 0; i < t.m; ++i) {
      if (t.B[i] < t.n || target.count(t.B[i]) || ExactOps::zero(t.D[i][s])) continue;
      r = i;
      break;
    }
    if (r < 0) return false;
    t.pivot(r, s);
  }
  for (int i = 0; i < t.m; ++i)
    if (ExactOps::neg(t.D[i][t.n + 1])) return false;
  return true;
}

// Best rational approximation with denominator at most max_den, by continued fractions.
bool reconstruct(double v, Rational& out) {
  constexpr long long max_den = 1ll << 24;
  if (!std::isfinite(v)) return false;
  if (std::fabs(v) < 1e-9) {
    out = 0;
    return true;
  }
  double a = std::fabs(v);
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double frac = a;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(frac);
    if (fl > 1e15) break;
    long long ai = static_cast<long long>(fl);
    long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1, q0 = q1, p1 = p2, q1 = q2;
    if (std::fabs(static_cast<double>(p1) / static_cast<double>(q1) - a) <= 1e-7 * std::max(1.0, a)) break;
    double rest = frac - fl;
    if (rest < 1e-15) break;
    frac = 1.0 / rest;
  }
  if (q1 == 0 || std::fabs(static_cast<double>(p1) / static_cast<double>(q1) - a) > 1e-7 * std::max(1.0, a)) return false;
  out = Rational(static_cast<long>(p1), static_cast<long>(q1));
  out.canonicalize();
  if (v < 0) out = -out;
  return true;
}

// Recomputes primal and dual of the final floating point basis by an LU solve,
// rounds them to nearby rationals and keeps them only when they certify
// optimality exactly.
bool certify_rounded(const LinearProgram& lp, const DoubleTableau& f, LpResult& r) {
  const int m = f.m, n = f.n;
  if (m == 0) return false;
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd b(m), cb = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) b(i) = lp.rows[i].rhs.get_d();
  for (int k = 0; k < m; ++k) {
    int v = f.B[k];
    if (v < 0) return false;
    if (v < n) {
      cb(k) = lp.objective[v].get_d();
    } else {
      basis(v - n, k) = 1;
    }
  }
  std::vector<int> pos(n, -1);
  for (int k = 0; k < m; ++k)
    if (f.B[k] < n) pos[f.B[k]] = k;
  for (int i = 0; i < m; ++i)
    for (const auto& [j, a] : lp.rows[i].coeffs)
      if (pos[j] >= 0) basis(i, pos[j]) += a.get_d();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
  Eigen::VectorXd xb = lu.solve(b);
  Eigen::VectorXd y = lu.transpose().solve(cb);
  r.x.assign(n, Rational(0));
  r.y.assign(m, Rational(0));
  for (int k = 0; k < m; ++k)
    if (f.B[k] < n && !reconstruct(xb(k), r.x[f.B[k]])) return false;
  for (int i = 0; i < m; ++i)
    if (!reconstruct(y(i), r.y[i])) return false;
  r.status = LpStatus::Optimal;
  r.value = 0;
  for (int j = 0; j < n; ++j) r.value += lp.objective[j] * r.x[j];
  return check_lp_certificate(lp, r);
}

}  // namespace

LpResult solve_lp(const LinearProgram& lp, LpMethod method) {
  if (method == LpMethod::Exact) return solve_exact(lp);
  DoubleTableau f(lp);
  LpStatus fs = f.solve(200000);
  for (int round = 0; fs == LpStatus::Optimal && !f.limit_hit && round < 3; ++round) {
    int before = f.pivots;
    if (!f.refresh() || !f.simplex(1, 200000)) {
      fs = LpStatus::Infeasible;
      break;
    }
    if (f.pivots == before) break;
  }
  if (fs != LpStatus::Optimal || f.limit_hit) return solve_exact(lp);
  LpResult rounded;
  if (certify_rounded(lp, f, rounded)) {
    rounded.pivots = f.pivots;
    rounded.warm_started = true;
    return rounded;
  }
  ExactTableau t(lp);
  if (!warm_start(t, f)) return solve_exact(lp);
  int before = t.pivots;
  if (!t.simplex(1, -1)) return solve_exact(lp);
  LpResult r = finish(t, LpStatus::Optimal);
  r.warm_started = true;
  r.pivots = t.pivots - before;
  return r;
}

bool check_lp_certificate(const LinearProgram& lp, const LpResult& r, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (r.status != LpStatus::Optimal) return fail("not optimal");
  if (static_cast<int>(r.x.size()) != lp.num_vars || r.y.size() != lp.rows.size()) return fail("size mismatch");
  for (const auto& v : r.x)
    if (v < 0) return fail("negative primal value");
  for (const auto& v : r.y)
    if (v < 0) return fail("negative dual value");
  Rational primal = 0, dual = 0;
  for (int j = 0; j < lp.num_vars; ++j) primal += lp.objective[j] * r.x[j];
  std::vector<Rational> aty(lp.num_vars);
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    Rational lhs = 0;
    for (const auto& [j, a] : lp.rows[i].coeffs) {
      lhs += a * r.x[j];
      aty[j] += a * r.y[i];
    }
    if (lhs > lp.rows[i].rhs) return fail("row " + std::to_string(i) + " violated");
    dual += lp.rows[i].rhs * r.y[i];
  }
  for (int j = 0; j < lp.num_vars; ++j)
    if (aty[j] < lp.objective[j]) return fail("dual constraint " + std::to_string(j) + " violated");
  if (primal != dual) return fail("objectives differ");
  if (primal != r.value) return fail("reported value differs");
  return true;
}

}  // namespace cqap
