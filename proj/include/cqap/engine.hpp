#pragma once

#include "cqap/database.hpp"
#include "cqap/decomposition.hpp"
#include "cqap/entropy.hpp"
#include "cqap/join.hpp"
#include "cqap/proofseq.hpp"
#include "cqap/query.hpp"
#include "cqap/relation.hpp"
#include "cqap/rules.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace cqap {

// ---------------------------------------------------------------------------
// Split steps

enum class BucketMode { Auto, Geometric, HeavyLight };

std::string bucket_mode_name(BucketMode m);
BucketMode bucket_mode_from_name(const std::string& s);

// One sub-table of a split: the rows of r whose X-value falls in the part.
struct SplitPart {
  std::vector<Tuple> x_values;   // sorted
  std::uint64_t n_x = 0;         // |Π_X| of the part
  std::uint64_t max_degree = 0;  // deg(Y|X) of the part
  Relation rows;
};

// Partitions r by deg(y|x).
// Geometric: X-values sorted by descending degree are packed greedily so that
// every part has n_x * max_degree <= |Π_y r|; at most 2*log2|Π_y r| + 2 parts.
// HeavyLight: two parts, deg >= threshold and deg < threshold.
// Empty parts are omitted; the parts are disjoint and cover r.
std::vector<SplitPart> split_relation(const Relation& r, VarSet x, VarSet y, BucketMode mode,
                                      double threshold = 0);

// ---------------------------------------------------------------------------
// Plans

// A rule together with the joint inequality chosen at the budget and its two proof sequences.
struct RulePlan {
  TwoPhaseRule rule;
  ObjStatus status = ObjStatus::Finite;
  Rational obj;  // optimal logT in units of log N
  std::optional<JointInequality> ineq;
  std::optional<ProofSequence> proof_s;  // normalized S side
  std::optional<ProofSequence> proof_t;  // T side
  VarSet online_target;                  // T-target computed for each online subproblem
};

// Solves the joint LP of every rule at logS = s (units of log N, Q = 1) and
// builds the proof sequences. Throws ValidationError if a proof cannot be built.
std::vector<RulePlan> plan_rules(const Cqap& q, const std::vector<TwoPhaseRule>& rules, const Rational& s);

// ---------------------------------------------------------------------------
// Subproblem execution

struct ModelResult {
  VarSet target;
  Relation relation;
  bool overflow = false;  // every target exceeded the limit
};

// A model of the disjunctive rule with the given targets over the join of
// `inputs`: the projection onto the target with the fewest tuples among those
// that stay within `limit`.
ModelResult panda_execute(const std::vector<JoinInput>& inputs, const std::vector<VarSet>& targets, std::size_t limit,
                          OpCounters* counters);

// ---------------------------------------------------------------------------
// Preprocessing

struct EngineConfig {
  BucketMode mode = BucketMode::Auto;
  double cap_factor = 4.0;             // S-target cap is cap_factor * 2^potential + 16
  std::size_t max_subproblems = 1u << 16;
  int jobs = 1;
};

// A split (Y, X) applied to the guard atom of Z.
struct SplitDescriptor {
  int atom = -1;
  VarSet x;
  VarSet y;
  double threshold = 0;  // heavy/light only
};

// One subproblem left for the online phase: a part index per split of its rule.
struct JEntry {
  int rule = -1;
  std::vector<int> parts;
};

struct RuleRun {
  BucketMode mode = BucketMode::Geometric;
  std::vector<SplitDescriptor> splits;
  std::size_t subproblems = 0;
  std::size_t materialized = 0;
  std::size_t aborted = 0;
  std::size_t over_cap = 0;  // fitting subproblems whose targets exceeded the cap
};

// S-view copy of one PMTD node after the preprocessing semijoin pass, with
// the hash indexes used online.
struct SViewNode {
  Relation full;       // over ν(t)
  HashIndex up_index;  // keyed by ν(t) ∩ ν(parent)
  Relation kept;       // projection on head variables, when the node stays in the reduced tree
  HashIndex down_index;
};

// Static shape of the reduced tree of a PMTD used by Online Yannakakis.
struct ReducedTree {
  std::vector<int> order;              // post-order of all nodes
  std::vector<bool> kept;              // node survives the bottom-up pass
  std::vector<int> new_parent;         // parent in the reduced tree, -1 for the root
  std::vector<VarSet> kept_schema;     // ν(t) ∩ H for kept nodes
  std::vector<VarSet> down_key;        // probe key in the top-down pass
};

ReducedTree reduce_tree(const Pmtd& p, VarSet head, VarSet access);

class PreprocessedStore {
 public:
  // Inputs shared with answer().
  Cqap query;
  std::vector<Pmtd> pmtds;
  std::vector<RulePlan> plans;
  EngineConfig config;
  Rational s_units;      // logS / logN used for planning
  double budget = 1;     // S in tuples
  std::uint64_t db_digest = 0;

  std::vector<Relation> atoms;
  std::vector<std::unique_ptr<TrieIndex>> atom_index;

  std::map<VarSet, Relation> s_views;
  std::vector<RuleRun> runs;
  std::vector<JEntry> j_index;
  OpCounters counters;  // preprocessing phase

  // Per PMTD: reduced tree and S-view copies per node.
  std::vector<ReducedTree> trees;
  std::vector<std::vector<std::unique_ptr<SViewNode>>> s_nodes;

  // Sub-tables of online subproblems, keyed by rule, atom and the part indices of the splits on that atom.
  struct SubTable {
    Relation rel;
    std::unique_ptr<TrieIndex> index;
  };
  using SubKey = std::tuple<int, int, std::vector<int>>;
  std::map<SubKey, SubTable> sub_tables;

  std::size_t stored_tuples() const;
  nlohmann::json manifest() const;
};

// Algorithm: split, test the potential of every subproblem, materialize the
// S-targets that fit and keep the others in the online index.
std::unique_ptr<PreprocessedStore> preprocess(const Database& db, const Cqap& q, const std::vector<Pmtd>& pmtds,
                                              const std::vector<RulePlan>& plans, double budget,
                                              const EngineConfig& config = {});

// Convenience: plans at logS = log2(budget) / log2(N) rounded to 1/64.
Rational budget_units(const Database& db, double budget);

struct AnswerResult {
  Relation answer;
  OpCounters counters;
  std::size_t online_subproblems = 0;
};

// Runs the online subproblems, unions the T-views, semijoin-reduces them and
// answers every PMTD by Online Yannakakis. Read-only on the store.
AnswerResult answer(const PreprocessedStore& store, const Relation& request);

// Evaluates one PMTD. `t_views` maps a schema to its online view.
Relation online_yannakakis(const Pmtd& p, const ReducedTree& tree, VarSet head, VarSet access,
                           const std::vector<std::unique_ptr<SViewNode>>& s_nodes,
                           const std::map<VarSet, Relation>& t_views, const Relation& request, OpCounters* counters);

// Stand-alone form: indexes the S-views on the fly (counted as preprocessing).
Relation online_yannakakis(const Pmtd& p, VarSet head, VarSet access, const std::map<VarSet, Relation>& s_views,
                           const std::map<VarSet, Relation>& t_views, const Relation& request,
                           OpCounters* counters = nullptr);

// Keeps the tuples of v that extend to the join of `atoms`.
Relation reduce_with_join(const Relation& v, const std::vector<Relation>& atoms);

// ---------------------------------------------------------------------------
// Persistence

std::uint64_t database_digest(const Database& db);
std::uint64_t query_digest(const Cqap& q);

// Directory with manifest.json, one TSV per S-view and j_index.json.
void save_store(const PreprocessedStore& store, const Database& db, const std::string& dir);
// Rebuilds the sub-tables from the base relations; ConfigError on a query or data mismatch.
std::unique_ptr<PreprocessedStore> load_store(const std::string& dir, const Database& db, const Cqap& q);

nlohmann::json counters_to_json(const OpCounters& c);

}  // namespace cqap
