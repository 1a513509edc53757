#pragma once

#include "cqap/entropy.hpp"
#include "cqap/rational.hpp"
#include "cqap/varset.hpp"

#include <json.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace cqap {

enum class StepKind { Submodularity, Monotonicity, Composition, Decomposition };

// Submodularity: a = I, b = J with I and J incomparable; moves w from h(I|I∩J) to h(I∪J|J).
// Monotonicity: a = X, b = Y; moves w from h(Y) to h(X).
// Composition: a = X, b = Y; h(X) + h(Y|X) becomes h(Y).
// Decomposition: a = X, b = Y; h(Y) becomes h(X) + h(Y|X).
struct ProofStep {
  StepKind kind = StepKind::Submodularity;
  VarSet a;
  VarSet b;
  Rational weight = 1;

  bool well_formed(std::string* why = nullptr) const;
  // The step vector: coordinates it adds to and takes from.
  ConditionalVector vector() const;
  bool operator==(const ProofStep& o) const = default;
};

struct ProofSequence {
  int n = 0;
  ConditionalVector initial;  // delta
  ConditionalVector target;   // lambda
  std::vector<ProofStep> steps;

  // delta after applying every step.
  ConditionalVector final_vector() const;
};

struct ProofCheck {
  bool ok = true;
  // Index of the offending step; steps.size() when only the final domination fails.
  int failed_step = -1;
  std::string reason;
};

// Replays the steps in exact arithmetic.
ProofCheck validate(const ProofSequence& ps);

// Witness-guided greedy construction. Applies the witness submodularity and
// monotonicity mass in whatever orientation and order keeps every coordinate
// nonnegative, composing and decomposing as needed, and stops as soon as the
// target is dominated. The result is validated before it is returned.
// Throws ValidationError carrying the residual vector when it gets stuck.
ProofSequence construct(const ShannonFlow& flow, std::size_t max_steps = 0);

// The flow divided by `norm`; invalid-argument when norm is zero.
ShannonFlow normalize(const ShannonFlow& flow, const Rational& norm);
// Scaled so that the target has unit l1 norm.
ShannonFlow normalize(const ShannonFlow& flow);

// S side scaled by 1/|theta| and T side scaled by 1/|lambda|.
ShannonFlow normalized_s_side(const JointInequality& ineq);
ShannonFlow normalized_t_side(const JointInequality& ineq);

// Replays the sequence on a set function: <delta,h>, <delta_1,h>, ..., <delta_l,h>.
std::vector<Rational> replay_values(const ProofSequence& ps, const SetFunction& h);

std::string step_kind_name(StepKind k);
StepKind step_kind_from_name(const std::string& s);
std::string step_label(const ProofStep& s, const std::vector<std::string>& names);

nlohmann::json proof_to_json(const ProofSequence& ps, const std::vector<std::string>& names);
// Reads a sequence; "variables" in the document takes precedence over `names` when present.
ProofSequence proof_from_json(const nlohmann::json& j, const std::vector<std::string>& names = {});

}  // namespace cqap
