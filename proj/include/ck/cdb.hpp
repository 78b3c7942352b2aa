// Cognitive database: meta-data base (Schema), data object base (instances,
// precedents, discovered invariants) and rule base, with projection queries
// and canonical line-delimited persistence.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ck/common.hpp"
#include "ck/ontology.hpp"
#include "ck/truth.hpp"

namespace ck {

// ---------------------------------------------------------------------------
// Records

struct ObjectRecord {
    Id id;
    Id type;
    std::optional<Timestamp> ts;                       // Event-kind records
    std::optional<std::pair<Timestamp, Timestamp>> span;  // Process-kind records
    std::map<Id, Id> attrs;          // classifier -> category
    std::map<Id, double> raw;        // numeric payloads, pre-binning
    std::map<Id, std::string> text;  // text payloads
    std::map<Id, Id> refs;           // type-ref attributes -> record id
    std::vector<std::pair<std::string, Id>> links;  // (relation name, target id)
    std::optional<Id> part_of;

    // Effective ordering time: event timestamp, else process start.
    std::optional<Timestamp> when() const {
        if (ts) return ts;
        if (span) return span->first;
        return std::nullopt;
    }

    // The record's literal set: +v for each known classifier value, plus the
    // implied exclusions -u for every other category of that classifier.
    std::vector<Literal> literals(const Schema& schema) const;

    bool same_content(const ObjectRecord& other) const;
};

enum class Provenance { Mined, Revised, Deduced, Induced, Abduced, Reinforced, Prior };

const char* provenance_name(Provenance p);
std::optional<Provenance> provenance_from_name(std::string_view name);

// A probabilistic rule: conjunction of disjunctive clauses -> one literal.
struct Rule {
    Id id;
    std::vector<std::vector<Literal>> premise;  // depth-2: AND of ORs
    Literal conclusion;
    TruthValue truth;
    double p_value = 1.0;
    Provenance provenance = Provenance::Mined;
    std::optional<Id> invariant_ref;

    // Every premise clause contains a literal present in `context`.
    bool fires_on(const std::set<Literal>& context) const;
    std::size_t premise_size() const;

    // Human-facing text: IF a=x AND (b=y OR b=z) THEN c=w P=... W=... PV=...
    std::string text() const;
};

// Sorts clauses and literals canonically and removes duplicates.
Rule canonicalized(Rule rule);
bool is_canonical(const Rule& rule);
// Throws on structural violations (empty clause, premise/conclusion clash,
// a literal present in both polarities).
void check_rule(const Rule& rule);
// Content-derived id, stable across runs: "r" + fnv64 of the canonical text.
Id rule_content_id(const Rule& rule);

// A discovered concept stored back into the object base.
struct InvariantRecord {
    Id id;
    TypeKind kind = TypeKind::Image;
    std::vector<std::pair<Literal, double>> intent;  // literal, weight
    std::vector<std::pair<Id, double>> extent;       // object id, match score
    std::vector<Id> parents;
    std::vector<Id> children;
    std::vector<Id> rules;

    std::vector<Literal> intent_literals() const;
};

// ---------------------------------------------------------------------------
// Queries

struct RecordFilter {
    std::optional<Id> type;           // exact type id
    std::optional<TypeKind> kind;     // subsumption match on the type's kind
    std::vector<Literal> literals;    // conjunctive constraints
    std::optional<std::pair<Timestamp, Timestamp>> window;  // inclusive, on when()
    std::optional<Id> part_of;
};

struct ProjectedRow {
    Id id;
    std::vector<std::optional<Id>> values;  // one per requested classifier
};

// ---------------------------------------------------------------------------
// Store

class Cdb {
public:
    Cdb() = default;
    explicit Cdb(Schema schema) : schema_(std::move(schema)) {}

    Schema& schema() { return schema_; }
    const Schema& schema() const { return schema_; }

    // Objects. put is idempotent on identical content; a different record
    // under an existing id is an IdConflict. Empty id gets a sequential one.
    Id put_record(ObjectRecord record);
    const ObjectRecord* find_record(const Id& id) const;
    const ObjectRecord& record(const Id& id) const;  // throws UnresolvedRef
    std::size_t record_count() const { return objects_.size(); }
    std::vector<ObjectRecord> query_records(const RecordFilter& filter) const;
    std::vector<ProjectedRow> query_records(const RecordFilter& filter,
                                            const std::vector<Id>& projection) const;
    // Children of a process record via part-of.
    std::vector<Id> children_of(const Id& id) const;
    // Labels an object with a (composite) classifier value; validates domain.
    void set_attr(const Id& id, const Id& classifier, const Id& category);

    // Rules. put_rule requires canonical form; upsert replaces content under
    // the same id (batch re-mining refresh path).
    Id put_rule(Rule rule);
    Id upsert_rule(Rule rule);
    // Refused while an invariant still references the rule.
    void remove_rule(const Id& id);
    void update_rule_truth(const Id& id, const TruthValue& tv, Provenance provenance);
    const Rule* find_rule(const Id& id) const;
    const Rule& rule(const Id& id) const;
    std::size_t rule_count() const { return rules_.size(); }
    std::vector<Rule> query_rules(const std::optional<std::set<Literal>>& pre_criteria,
                                  const std::optional<Literal>& post_criteria) const;
    std::vector<Rule> all_rules() const;

    // Invariants.
    Id put_invariant(InvariantRecord inv);
    const InvariantRecord* find_invariant(const Id& id) const;
    std::vector<InvariantRecord> query_invariants(
        std::optional<TypeKind> kind = {},
        const std::vector<Id>& classifiers = {}) const;
    std::size_t invariant_count() const { return invariants_.size(); }

    // Persistence: canonical snapshot files under `dir` (meta.schema,
    // objects.jsonl, invariants.jsonl, rules.jsonl), each with a checksum
    // trailer. load(persist(db)) reproduces the store exactly.
    void persist(const std::string& dir) const;
    static Cdb load(const std::string& dir);

    // Verifies the secondary indexes against a linear scan; test support.
    bool check_indexes() const;

private:
    void index_record(const ObjectRecord& rec);
    void validate_links(const ObjectRecord& rec, ValidationReport& report) const;

    Schema schema_;
    std::map<Id, ObjectRecord> objects_;
    std::map<Id, InvariantRecord> invariants_;
    std::map<Id, Rule> rules_;
    std::uint64_t next_object_seq_ = 1;

    // secondary indexes, rebuilt on load
    std::map<Id, std::vector<Id>> by_type_;
    std::map<std::pair<Id, Id>, std::vector<Id>> by_literal_;  // (classifier, category)
    std::multimap<Timestamp, Id> by_time_;
};

// Ingestion helpers. apply_binning turns raw numeric payloads into
// classifier categories via the type's numeric attributes;
// freeze_quantile_bins fixes missing cut points from the batch (equal-count
// quantiles, one bin per category) before the first binning pass.
void apply_binning(ObjectRecord& record, const Schema& schema);
void freeze_quantile_bins(Schema& schema, const std::vector<ObjectRecord>& batch);

// Canonical JSON (single line, fixed key order) for the three record kinds.
std::string to_jsonl(const ObjectRecord& rec);
std::string to_jsonl(const Rule& rule);
std::string to_jsonl(const InvariantRecord& inv);
ObjectRecord record_from_json(const std::string& line);
Rule rule_from_json(const std::string& line);
InvariantRecord invariant_from_json(const std::string& line);

}  // namespace ck
