#include "cqap/rules.hpp"

#include "cqap/errors.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace cqap {

namespace {

bool target_less(const RuleTarget& a, const RuleTarget& b) { return varset_less(a.schema, b.schema); }

std::vector<VarSet> schemas(const std::vector<RuleTarget>& ts) {
  std::vector<VarSet> out;
  for (const auto& t : ts) out.push_back(t.schema);
  return out;
}

void add_target(std::vector<RuleTarget>& ts, VarSet schema, TargetSource src) {
  for (auto& t : ts)
    if (t.schema == schema) {
      t.sources.push_back(src);
      return;
    }
  ts.push_back({schema, {src}});
}

bool subset_targets(const std::vector<VarSet>& a, const std::vector<VarSet>& b) {
  for (auto x : a)
    if (std::find(b.begin(), b.end(), x) == b.end()) return false;
  return true;
}

}  // namespace

std::vector<VarSet> TwoPhaseRule::s_schemas() const { return schemas(s_targets); }
std::vector<VarSet> TwoPhaseRule::t_schemas() const { return schemas(t_targets); }

bool TwoPhaseRule::same_targets(const TwoPhaseRule& o) const {
  return s_schemas() == o.s_schemas() && t_schemas() == o.t_schemas();
}

std::vector<TwoPhaseRule> generate_rules(const std::vector<Pmtd>& pmtds, std::size_t cap) {
  if (pmtds.empty()) throw InvalidArgument("rule generation needs at least one PMTD");
  std::size_t total = 1;
  for (const auto& p : pmtds) {
    total *= static_cast<std::size_t>(p.decomp.size());
    if (total > cap) throw ResourceError("rule cartesian product exceeds cap", total);
  }
  std::vector<TwoPhaseRule> out;
  std::set<std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>> seen;
  std::vector<int> choice(pmtds.size(), 0);
  while (true) {
    TwoPhaseRule r;
    for (std::size_t i = 0; i < pmtds.size(); ++i) {
      int t = choice[i];
      VarSet v = pmtds[i].nu[t];
      if (v.empty()) continue;
      add_target(pmtds[i].m[t] ? r.s_targets : r.t_targets, v, {static_cast<int>(i), t});
    }
    std::sort(r.s_targets.begin(), r.s_targets.end(), target_less);
    std::sort(r.t_targets.begin(), r.t_targets.end(), target_less);
    std::vector<std::uint32_t> ks, kt;
    for (auto s : r.s_schemas()) ks.push_back(s.bits());
    for (auto s : r.t_schemas()) kt.push_back(s.bits());
    if (seen.insert({ks, kt}).second) out.push_back(std::move(r));
    std::size_t i = 0;
    while (i < pmtds.size() && ++choice[i] == pmtds[i].decomp.size()) choice[i++] = 0;
    if (i == pmtds.size()) break;
  }
  return out;
}

TwoPhaseRule reduce_targets(const TwoPhaseRule& r) {
  auto reduce = [](const std::vector<RuleTarget>& ts) {
    std::vector<RuleTarget> out;
    for (const auto& t : ts) {
      bool dominated = false;
      for (const auto& o : ts) dominated = dominated || o.schema.proper_subset_of(t.schema);
      if (!dominated) out.push_back(t);
    }
    return out;
  };
  TwoPhaseRule o;
  o.s_targets = reduce(r.s_targets);
  o.t_targets = reduce(r.t_targets);
  return o;
}

std::vector<TwoPhaseRule> prune_rules(const std::vector<TwoPhaseRule>& rules) {
  std::vector<TwoPhaseRule> reduced;
  for (const auto& r : rules) reduced.push_back(reduce_targets(r));
  std::vector<TwoPhaseRule> out;
  for (std::size_t a = 0; a < reduced.size(); ++a) {
    const auto sa = reduced[a].s_schemas(), ta = reduced[a].t_schemas();
    bool drop = false;
    for (std::size_t b = 0; b < reduced.size() && !drop; ++b) {
      if (a == b) continue;
      const auto sb = reduced[b].s_schemas(), tb = reduced[b].t_schemas();
      if (!subset_targets(sb, sa) || !subset_targets(tb, ta)) continue;
      bool equal = sa.size() == sb.size() && ta.size() == tb.size();
      drop = !equal || b < a;
    }
    if (!drop) out.push_back(reduced[a]);
  }
  std::stable_sort(out.begin(), out.end(), [](const TwoPhaseRule& x, const TwoPhaseRule& y) {
    if (x.target_count() != y.target_count()) return x.target_count() < y.target_count();
    auto key = [](const TwoPhaseRule& r) {
      std::vector<std::pair<int, std::vector<int>>> k;
      for (auto s : r.t_schemas()) k.emplace_back(0, s.members());
      for (auto s : r.s_schemas()) k.emplace_back(1, s.members());
      return k;
    };
    return key(x) < key(y);
  });
  return out;
}

bool full_choice_coverage(const std::vector<Pmtd>& pmtds, const std::vector<TwoPhaseRule>& rules,
                          std::string* counterexample) {
  // Universe of (kind, schema) views.
  std::map<std::pair<bool, std::uint32_t>, int> ids;
  auto id_of = [&](bool s, VarSet v) {
    auto key = std::make_pair(s, v.bits());
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    int id = static_cast<int>(ids.size());
    ids.emplace(key, id);
    return id;
  };
  std::vector<std::uint64_t> pmtd_masks;
  for (const auto& p : pmtds) {
    std::uint64_t m = 0;
    for (int t = 0; t < p.decomp.size(); ++t) m |= 1ull << id_of(p.m[t], p.nu[t]);
    pmtd_masks.push_back(m);
  }
  std::vector<std::uint64_t> rule_masks;
  for (const auto& r : rules) {
    std::uint64_t m = 0;
    for (const auto& t : r.s_targets) m |= 1ull << id_of(true, t.schema);
    for (const auto& t : r.t_targets) m |= 1ull << id_of(false, t.schema);
    rule_masks.push_back(m);
  }
  const int u = static_cast<int>(ids.size());
  if (u > 26) throw ResourceError("view universe too large for exhaustive coverage check", static_cast<std::size_t>(u));
  for (std::uint64_t c = 0; c < (1ull << u); ++c) {
    bool hits = true;
    for (auto rm : rule_masks)
      if (!(rm & c)) {
        hits = false;
        break;
      }
    if (!hits) continue;
    bool covered = false;
    for (auto pm : pmtd_masks)
      if ((pm & c) == pm) {
        covered = true;
        break;
      }
    if (!covered) {
      if (counterexample) {
        std::string s;
        for (const auto& [key, id] : ids)
          if (c >> id & 1ull) s += std::string(key.first ? "S" : "T") + std::to_string(key.second) + " ";
        *counterexample = s;
      }
      return false;
    }
  }
  return true;
}

std::string rule_label(const TwoPhaseRule& r, const Cqap& q) {
  std::string s;
  for (const auto& t : r.t_targets) s += (s.empty() ? "" : " ∨ ") + ("T" + q.set_label(t.schema));
  for (const auto& t : r.s_targets) s += (s.empty() ? "" : " ∨ ") + ("S" + q.set_label(t.schema));
  return s;
}

nlohmann::json rule_to_json(const TwoPhaseRule& r, const Cqap& q) {
  auto targets = [&](const std::vector<RuleTarget>& ts) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& t : ts) {
      nlohmann::json src = nlohmann::json::array();
      for (auto [p, n] : t.sources) src.push_back({{"pmtd", p}, {"node", n}});
      a.push_back({{"schema", q.set_names(t.schema)}, {"sources", src}});
    }
    return a;
  };
  return {{"label", rule_label(r, q)}, {"s_targets", targets(r.s_targets)}, {"t_targets", targets(r.t_targets)}};
}

}  // namespace cqap
