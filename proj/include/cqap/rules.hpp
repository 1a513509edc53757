#pragma once

#include "cqap/decomposition.hpp"
#include "cqap/query.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace cqap {

// (pmtd index, node index) that contributed a target.
using TargetSource = std::pair<int, int>;

struct RuleTarget {
  VarSet schema;
  std::vector<TargetSource> sources;
};

// A disjunctive rule over the shared body with S-targets and T-targets.
struct TwoPhaseRule {
  std::vector<RuleTarget> s_targets;
  std::vector<RuleTarget> t_targets;

  std::vector<VarSet> s_schemas() const;
  std::vector<VarSet> t_schemas() const;
  std::size_t target_count() const { return s_targets.size() + t_targets.size(); }
  bool same_targets(const TwoPhaseRule& o) const;
};

// One rule per element of the cartesian product of the PMTD view sets.
std::vector<TwoPhaseRule> generate_rules(const std::vector<Pmtd>& pmtds, std::size_t cap = 5000000);

// Within each rule, drops a target that strictly contains another target of the same kind.
TwoPhaseRule reduce_targets(const TwoPhaseRule& r);

// Removes every rule whose targets strictly contain those of another rule,
// and duplicates. Targets are reduced first.
std::vector<TwoPhaseRule> prune_rules(const std::vector<TwoPhaseRule>& rules);

// For every way of picking one target per rule, some PMTD has all of its views
// picked. Checked over every hitting set of the view universe.
bool full_choice_coverage(const std::vector<Pmtd>& pmtds, const std::vector<TwoPhaseRule>& rules,
                          std::string* counterexample = nullptr);

// "T134 ∨ T124 ∨ S14"
std::string rule_label(const TwoPhaseRule& r, const Cqap& q);

nlohmann::json rule_to_json(const TwoPhaseRule& r, const Cqap& q);

}  // namespace cqap
