// Probabilistic formal concepts: formal contexts over DOB records, fixed
// points of the rule-closure operator, concept grouping and hierarchies,
// and composite classifiers derived from discovered concepts.
#pragma once

#include <optional>
#include <vector>

#include "ck/cdb.hpp"
#include "ck/lpi.hpp"

namespace ck {

// Boolean incidence structure: for each object and known classifier value,
// the positive literal of that value and the negative literals of the
// classifier's other categories are incident; unknown classifiers leave
// no incident literals of either polarity.
struct FormalContext {
    std::vector<Id> objects;          // ascending object id
    std::vector<Literal> attributes;  // canonical literal order
    std::vector<std::vector<bool>> incidence;
    std::vector<Id> classifiers;

    int attribute_index(const Literal& lit) const;
    std::vector<Literal> row(std::size_t object_idx) const;
};

FormalContext build_context(const std::vector<ObjectRecord>& records,
                            const std::vector<Id>& classifiers, const Schema& schema);

// Saturates `state` under all rules with p_hat >= theta. A derived positive
// value carries its classifier's sibling exclusions (the incidence invariant
// holds for derived knowns too, with siblings taken from `attribute_space`).
// Contradictions — both polarities of a literal, or two positive values of
// one classifier — are resolved by pooled p_hat of the firing rules (evidence
// for a value also counts against its siblings); an exact tie drops both and
// a dropped literal stays blocked before re-saturation. Raises NonConvergence
// if the outer loop exceeds the attribute-space bound.
std::vector<Literal> closure(const std::vector<Literal>& state, const std::vector<Rule>& rules,
                             double theta = 0.9,
                             const std::vector<Literal>& attribute_space = {});

struct Concept {
    Id id;
    std::vector<std::pair<Literal, double>> intent;  // literal, weight
    std::vector<Id> extent;
    bool fixed_point = true;
    std::vector<Id> rules;  // defining rule ids

    std::vector<Literal> intent_literals() const;
};

struct ConceptParams {
    double theta = 0.9;
    double w_min = 5.0;
    double alpha = 0.05;
    int min_extent = 2;
    int max_premise = 1;  // attribute-to-attribute rules
};

struct ConceptDiscovery {
    std::vector<Concept> concepts;
    std::vector<Rule> rules;  // the mined rule system behind the closures
};

// Mines attribute-to-attribute rules on the context, closes every object
// row, and groups objects by the resulting fixed point.
ConceptDiscovery find_concepts(const FormalContext& context, const ConceptParams& params = {});

// Transitive reduction of strict intent inclusion; annotates parents and
// children on the concepts and returns the (parent, child) edge list.
std::vector<std::pair<Id, Id>> build_hierarchy(std::vector<Concept>& concepts,
                                               std::vector<std::pair<std::vector<Id>, std::vector<Id>>>* links = nullptr);

struct Assignment {
    Id concept_id;
    double score;
};

// Net intent agreement in [-1,1]: +1 per matched literal, -1 per literal
// held in the opposite polarity, 0 for unknowns, divided by intent size.
double match_score(const ObjectRecord& record, const Concept& cpt, const Schema& schema);

std::optional<Assignment> assign(const ObjectRecord& record, const std::vector<Concept>& concepts,
                                 const Schema& schema, double threshold = 0.5);

// Registers a composite classifier with one category per concept, extends
// the affected types, and labels every in-scope DOB object via assign.
Id derive_composite_classifier(Cdb& db, const std::vector<Concept>& concepts,
                               const std::string& name, double assign_threshold = 0.5);

// Stores discovery output: rules into the RB, concepts as Image invariants.
std::vector<Id> store_concepts(Cdb& db, const ConceptDiscovery& discovery);

}  // namespace ck
