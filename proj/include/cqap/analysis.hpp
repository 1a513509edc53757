#pragma once

#include "cqap/decomposition.hpp"
#include "cqap/entropy.hpp"
#include "cqap/proofseq.hpp"
#include "cqap/query.hpp"
#include "cqap/rules.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace cqap {

struct AnalyzeOptions {
  int max_bag = 0;                    // 0: number of variables
  std::vector<TradeoffTerm> catalog;  // extra terms, kept per rule only when certified
};

struct TermReport {
  TradeoffTerm term;
  std::optional<ProofSequence> proof_s;
  std::optional<ProofSequence> proof_t;
};

struct RuleReport {
  TwoPhaseRule rule;
  std::optional<Rational> s_max;
  bool unbounded = false;
  std::vector<TermReport> terms;    // lp sweep plus certified bfs
  std::vector<TermReport> catalog;  // certified catalog terms
};

struct AnalysisReport {
  std::vector<Pmtd> pmtds;
  std::vector<RuleReport> rules;
  TradeoffCurve envelope;                  // at N = 1, Q = 0 in log units
  std::optional<TradeoffCurve> catalog_envelope;
};

// Sweeps every rule with Q slightly above 1 so that its exponent is
// recovered, certifies the bfs and catalog terms, and builds both proof
// sequences of every inequality.
AnalysisReport analyze_query(const Cqap& q, const AnalyzeOptions& opt = {});

// Reads one term per line; '#' starts a comment.
std::vector<TradeoffTerm> read_catalog(const std::string& path);

std::string report_text(const AnalysisReport& r, const Cqap& q);
nlohmann::json report_json(const AnalysisReport& r, const Cqap& q);

}  // namespace cqap
