#include "cqap/proofseq.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <map>

namespace cqap {

bool ProofStep::well_formed(std::string* why) const {
  auto fail = [&](const char* m) {
    if (why) *why = m;
    return false;
  };
  if (sgn(weight) <= 0) return fail("weight must be positive");
  if (kind == StepKind::Submodularity) {
    if (a.subset_of(b) || b.subset_of(a)) return fail("submodularity needs incomparable sets");
  } else if (!a.proper_subset_of(b)) {
    return fail("step needs X strictly inside Y");
  }
  return true;
}

ConditionalVector ProofStep::vector() const {
  ConditionalVector v;
  const VarSet e;
  switch (kind) {
    case StepKind::Submodularity:
      v.add(a & b, a, -weight);
      v.add(b, a | b, weight);
      break;
    case StepKind::Monotonicity:
      v.add(e, b, -weight);
      v.add(e, a, weight);
      break;
    case StepKind::Composition:
      v.add(e, a, -weight);
      v.add(a, b, -weight);
      v.add(e, b, weight);
      break;
    case StepKind::Decomposition:
      v.add(e, a, weight);
      v.add(a, b, weight);
      v.add(e, b, -weight);
      break;
  }
  return v;
}

ConditionalVector ProofSequence::final_vector() const {
  ConditionalVector v = initial;
  for (const auto& s : steps) v = v + s.vector();
  return v;
}

ProofCheck validate(const ProofSequence& ps) {
  ProofCheck r;
  auto fail = [&](int i, std::string why) {
    r.ok = false;
    r.failed_step = i;
    r.reason = std::move(why);
    return r;
  };
  const VarSet all = VarSet::full(ps.n);
  if (!ps.initial.nonnegative()) return fail(0, "initial vector has a negative coordinate");
  ConditionalVector v = ps.initial;
  for (std::size_t i = 0; i < ps.steps.size(); ++i) {
    const auto& s = ps.steps[i];
    std::string why;
    if (!s.well_formed(&why)) return fail(static_cast<int>(i), why);
    if (!(s.a | s.b).subset_of(all)) return fail(static_cast<int>(i), "step uses variables outside [n]");
    v = v + s.vector();
    for (const auto& [key, c] : v.coeffs())
      if (sgn(c) < 0)
        return fail(static_cast<int>(i), "coordinate (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                                             ") becomes " + to_string(c));
  }
  for (const auto& [key, c] : ps.target.coeffs()) {
    Rational have = v.get(VarSet(key.first), VarSet(key.second));
    if (have < c)
      return fail(static_cast<int>(ps.steps.size()), "final coordinate (" + std::to_string(key.first) + "," +
                                                         std::to_string(key.second) + ") is " + to_string(have) +
                                                         " < " + to_string(c));
  }
  return r;
}

namespace {

class Builder {
 public:
  Builder(const ShannonFlow& f, std::size_t cap) : f_(f), v_(f.delta), cap_(cap) {
    for (const auto& [k, c] : f.witness.sigma)
      if (sgn(c) > 0) sigma_[k] = c;
    for (const auto& [k, c] : f.witness.mu)
      if (sgn(c) > 0) mu_[k] = c;
  }

  std::vector<ProofStep> run() {
    while (!done()) {
      if (steps_.size() > cap_) throw ResourceError("proof construction exceeded its step budget", steps_.size());
      if (compose() || sigma_direct() || mu_direct() || sigma_enabled() || mu_enabled()) continue;
      throw ValidationError("proof construction stuck; residual " + residual());
    }
    return steps_;
  }

 private:
  Rational at(VarSet x, VarSet y) const { return v_.get(x, y); }

  bool done() const {
    for (const auto& [k, c] : f_.lambda.coeffs())
      if (at(VarSet(k.first), VarSet(k.second)) < c) return false;
    return true;
  }

  void apply(StepKind kind, VarSet a, VarSet b, const Rational& w) {
    ProofStep s{kind, a, b, w};
    v_ = v_ + s.vector();
    if (!steps_.empty() && steps_.back().kind == kind && steps_.back().a == a && steps_.back().b == b)
      steps_.back().weight += s.weight;
    else
      steps_.push_back(s);
  }

  // A pending submodularity step would consume (x, y) directly.
  bool wanted(VarSet x, VarSet y) const {
    for (const auto& [k, r] : sigma_) {
      VarSet i(k.first), j(k.second);
      if ((y == i && x == (i & j)) || (y == j && x == (i & j))) return true;
    }
    return false;
  }

  bool compose() {
    for (const auto& [k, c] : v_.coeffs()) {
      VarSet x(k.first), y(k.second);
      if (x.empty() || sgn(c) <= 0) continue;
      Rational base = at(VarSet(), x);
      if (sgn(base) <= 0 || wanted(x, y) || wanted(VarSet(), x)) continue;
      Rational w = std::min(c, base);
      apply(StepKind::Composition, x, y, w);
      return true;
    }
    return false;
  }

  bool use_sigma(std::map<std::pair<std::uint32_t, std::uint32_t>, Rational>::iterator it, VarSet i, VarSet j) {
    Rational avail = at(i & j, i);
    if (sgn(avail) <= 0) return false;
    Rational w = std::min(avail, it->second);
    apply(StepKind::Submodularity, i, j, w);
    it->second -= w;
    if (sgn(it->second) == 0) sigma_.erase(it);
    return true;
  }

  bool sigma_direct() {
    for (auto it = sigma_.begin(); it != sigma_.end(); ++it) {
      VarSet i(it->first.first), j(it->first.second);
      if (use_sigma(it, i, j) || use_sigma(it, j, i)) return true;
    }
    return false;
  }

  bool mu_direct() {
    for (auto it = mu_.begin(); it != mu_.end(); ++it) {
      VarSet x(it->first.first), y(it->first.second);
      Rational avail = at(VarSet(), y);
      if (sgn(avail) <= 0) continue;
      Rational w = std::min(avail, it->second);
      apply(StepKind::Monotonicity, x, y, w);
      it->second -= w;
      if (sgn(it->second) == 0) mu_.erase(it);
      return true;
    }
    return false;
  }

  // Smallest unconditional coordinate strictly above s that carries mass.
  VarSet mass_above(VarSet s) const {
    VarSet best;
    for (const auto& [k, c] : v_.coeffs()) {
      VarSet y(k.second);
      if (k.first != 0 || sgn(c) <= 0 || !s.proper_subset_of(y)) continue;
      if (best.empty() || varset_less(y, best)) best = y;
    }
    return best;
  }

  // Makes (i∩j, i) available by decomposing an unconditional coordinate, then applies the step.
  bool enable_sigma(std::map<std::pair<std::uint32_t, std::uint32_t>, Rational>::iterator it, VarSet i, VarSet j) {
    const VarSet k = i & j;
    const Rational need = it->second;
    if (sgn(at(VarSet(), i)) <= 0) {
      VarSet y = mass_above(i);
      if (y.empty()) return false;
      apply(StepKind::Decomposition, i, y, std::min(need, at(VarSet(), y)));
    }
    if (!k.empty()) apply(StepKind::Decomposition, k, i, std::min(need, at(VarSet(), i)));
    return use_sigma(it, i, j);
  }

  bool sigma_enabled() {
    for (auto it = sigma_.begin(); it != sigma_.end(); ++it) {
      VarSet i(it->first.first), j(it->first.second);
      if (enable_sigma(it, i, j) || enable_sigma(it, j, i)) return true;
    }
    return false;
  }

  bool mu_enabled() {
    for (auto it = mu_.begin(); it != mu_.end(); ++it) {
      VarSet x(it->first.first), y(it->first.second);
      VarSet above = mass_above(y);
      if (above.empty()) continue;
      apply(StepKind::Decomposition, y, above, std::min(it->second, at(VarSet(), above)));
      return mu_direct();
    }
    return false;
  }

  std::string residual() const {
    std::string s;
    for (const auto& [k, c] : v_.coeffs())
      s += "(" + std::to_string(k.first) + "," + std::to_string(k.second) + ")=" + to_string(c) + " ";
    for (const auto& [k, c] : sigma_)
      s += "sigma(" + std::to_string(k.first) + "," + std::to_string(k.second) + ")=" + to_string(c) + " ";
    for (const auto& [k, c] : mu_)
      s += "mu(" + std::to_string(k.first) + "," + std::to_string(k.second) + ")=" + to_string(c) + " ";
    return s;
  }

  const ShannonFlow& f_;
  ConditionalVector v_;
  std::size_t cap_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Rational> sigma_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Rational> mu_;
  std::vector<ProofStep> steps_;
};

}  // namespace

ProofSequence construct(const ShannonFlow& flow, std::size_t max_steps) {
  std::string why;
  if (!check_witness(flow, &why)) throw InvalidArgument("construct needs a valid witness: " + why);
  if (max_steps == 0) max_steps = (std::size_t{16} << (2 * flow.n)) + 64;
  ProofSequence ps{flow.n, flow.delta, flow.lambda, Builder(flow, max_steps).run()};
  auto check = validate(ps);
  if (!check.ok)
    throw ValidationError("constructed sequence fails at step " + std::to_string(check.failed_step) + ": " +
                          check.reason);
  return ps;
}

ShannonFlow normalize(const ShannonFlow& flow, const Rational& norm) {
  if (sgn(norm) == 0) throw InvalidArgument("cannot normalize by a zero norm");
  Rational k = 1 / norm;
  return {flow.n, flow.delta.scaled(k), flow.lambda.scaled(k), flow.witness.scaled(k)};
}

ShannonFlow normalize(const ShannonFlow& flow) { return normalize(flow, flow.lambda.norm1()); }

ShannonFlow normalized_s_side(const JointInequality& ineq) { return normalize(ineq.s_side(), ineq.theta_norm()); }
ShannonFlow normalized_t_side(const JointInequality& ineq) { return normalize(ineq.t_side(), ineq.lambda_norm()); }

std::vector<Rational> replay_values(const ProofSequence& ps, const SetFunction& h) {
  std::vector<Rational> out;
  ConditionalVector v = ps.initial;
  out.push_back(v.eval(h));
  for (const auto& s : ps.steps) {
    v = v + s.vector();
    out.push_back(v.eval(h));
  }
  return out;
}

std::string step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::Submodularity: return "submodularity";
    case StepKind::Monotonicity: return "monotonicity";
    case StepKind::Composition: return "composition";
    case StepKind::Decomposition: return "decomposition";
  }
  return "";
}

StepKind step_kind_from_name(const std::string& s) {
  for (auto k : {StepKind::Submodularity, StepKind::Monotonicity, StepKind::Composition, StepKind::Decomposition})
    if (step_kind_name(k) == s) return k;
  throw InvalidArgument("unknown proof step kind: " + s);
}

std::string step_label(const ProofStep& s, const std::vector<std::string>& names) {
  auto set = [&](VarSet v) {
    std::string o;
    for (int m : v.members()) o += (o.empty() ? "" : ",") + (m < static_cast<int>(names.size()) ? names[m] : std::to_string(m));
    return "{" + o + "}";
  };
  const char* tag = s.kind == StepKind::Submodularity  ? "s"
                    : s.kind == StepKind::Monotonicity ? "m"
                    : s.kind == StepKind::Composition  ? "c"
                                                       : "d";
  return to_string(s.weight) + "*" + tag + "(" + set(s.a) + "," + set(s.b) + ")";
}

nlohmann::json proof_to_json(const ProofSequence& ps, const std::vector<std::string>& names) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : ps.steps) {
    nlohmann::json j = {{"rule", step_kind_name(s.kind)}, {"weight", to_string(s.weight)}};
    if (s.kind == StepKind::Submodularity) {
      j["i"] = varset_to_json(s.a, names);
      j["j"] = varset_to_json(s.b, names);
    } else {
      j["x"] = varset_to_json(s.a, names);
      j["y"] = varset_to_json(s.b, names);
    }
    steps.push_back(j);
  }
  return {{"variables", names},
          {"initial", conditional_to_json(ps.initial, names)},
          {"target", conditional_to_json(ps.target, names)},
          {"steps", steps}};
}

ProofSequence proof_from_json(const nlohmann::json& j, const std::vector<std::string>& names) {
  std::vector<std::string> vars = j.contains("variables") ? j.at("variables").get<std::vector<std::string>>() : names;
  if (vars.empty()) throw InvalidArgument("proof sequence needs variable names");
  ProofSequence ps;
  ps.n = static_cast<int>(vars.size());
  ps.initial = conditional_from_json(j.at("initial"), vars);
  ps.target = conditional_from_json(j.at("target"), vars);
  for (const auto& s : j.at("steps")) {
    ProofStep st;
    st.kind = step_kind_from_name(s.at("rule").get<std::string>());
    st.weight = parse_rational(s.at("weight").get<std::string>());
    if (st.kind == StepKind::Submodularity) {
      st.a = varset_from_json(s.at("i"), vars);
      st.b = varset_from_json(s.at("j"), vars);
    } else {
      st.a = varset_from_json(s.at("x"), vars);
      st.b = varset_from_json(s.at("y"), vars);
    }
    ps.steps.push_back(st);
  }
  return ps;
}

}  // namespace cqap
