// Logical-probabilistic inference: the four rule operations, Fisher exact
// significance, significance-filtered rule mining over precedents, and
// ranked prediction.
#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "ck/cdb.hpp"

namespace ck {

// ---------------------------------------------------------------------------
// Rule operations

struct InferenceParams {
    double eta = 0.5;  // hypothesis discount for induction/abduction
};

// Chains A->B with B->C into A->C; the middle literal must be the sole
// literal of some premise clause of r_bc. The result's smoothed probability
// equals p_hat(r_ab) * p_hat(r_bc), with total weight min(w1,w2) scaled by
// that product.
Rule deduce(const Rule& r_ab, const Rule& r_bc);

// From A->B and A->C (identical premises) hypothesizes B->C.
Rule induce(const Rule& r_ab, const Rule& r_ac, const InferenceParams& params = {});

// From A->C and B->C (identical conclusions) hypothesizes A->B.
Rule abduce(const Rule& r_ac, const Rule& r_bc, const InferenceParams& params = {});

// ---------------------------------------------------------------------------
// Fisher exact test on a 2x2 table [[a,b],[c,d]].

enum class FisherSided { Right, Two };

double fisher_exact(const std::array<std::array<long long, 2>, 2>& table,
                    FisherSided sided = FisherSided::Right);
inline double fisher_exact(long long a, long long b, long long c, long long d,
                           FisherSided sided = FisherSided::Right) {
    return fisher_exact({{{a, b}, {c, d}}}, sided);
}

// ---------------------------------------------------------------------------
// Mining

struct MineParams {
    int max_premise = 3;
    double w_min = 5.0;
    double alpha = 0.05;
    bool bonferroni = true;          // per-target correction, configurable off
    bool negative_premises = false;  // admit !c=v atoms in premises
};

// One boolean row per object: the literals it carries.
struct TransactionSet {
    std::vector<Id> object_ids;
    std::vector<std::vector<Literal>> rows;
};

TransactionSet transactions_from_records(const std::vector<ObjectRecord>& records,
                                         const Schema& schema);

// Breadth-first search over conjunctive premises. A rule is emitted iff
//   (i) its support count reaches w_min,
//  (ii) its conditional frequency strictly exceeds that of every proper
//       sub-premise including the empty one, and
// (iii) the right-sided Fisher p on premise/conclusion is within alpha
//       (Bonferroni-adjusted per target by default).
// Stored truth values are the audited contingency counts
// (count(premise & conclusion), count(premise)) over rows where the
// conclusion's classifier is known.
std::vector<Rule> mine_rules_core(const TransactionSet& transactions,
                                  const std::vector<Literal>& premise_atoms,
                                  const std::vector<Literal>& conclusions,
                                  const MineParams& params = {});

// Mines positive-literal rules from DOB records toward the target classifiers.
std::vector<Rule> mine_rules(const Cdb& db, const std::vector<Id>& targets,
                             const MineParams& params = {},
                             const std::optional<Id>& record_type = {});

// ---------------------------------------------------------------------------
// Prediction

struct Forecast {
    Literal target;
    TruthValue pooled;
    double p_hat = 0.5;
    double p_value = 1.0;
    std::vector<Id> support;        // contributing rule ids; empty => prior-only
    std::vector<Literal> context;   // the literal set used

    bool prior_only() const { return support.empty(); }
};

// One forecast per category of `target`. A rule fires when every premise
// clause has a literal present in the context (unknowns satisfy nothing;
// negative literals only fire on explicit exclusion marks). Firing rules'
// truth values are pooled by revision; silent categories fall back to the
// Laplace base rate over the object base.
std::vector<Forecast> predict(const Cdb& db, const std::set<Literal>& context, const Id& target);

enum class RankMode { Probability, Significance, Combined };

double combined_score(const Forecast& f);  // p_hat * (1 - p_value)

// Deterministic ordering; ties broken by category id.
std::vector<Forecast> rank(std::vector<Forecast> forecasts, RankMode mode);

std::optional<RankMode> rank_mode_from_name(std::string_view name);

}  // namespace ck
